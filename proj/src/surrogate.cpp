#include "cascades/surrogate.hpp"

#include <algorithm>
#include <sstream>

namespace cascades {

std::string build_agent_prompt(const AgentContext& ctx, int n_s) {
    std::ostringstream os;
    os << "Your job is to propose " << n_s
       << " simple surrogate operations for the classification task below. "
          "Each surrogate must target a different detection type from the "
          "following list:\n"
          "- Entity Detection (checks for presence of a specific entity)\n"
          "- Event Detection (detects a particular event or outcome)\n"
          "- Relationship Detection (identifies a connection or association)\n"
          "- Context Detection (determines the broader setting)\n"
          "- Attribute Detection (checks for a property or attribute)\n"
          "- Any other type not mentioned above\n\n"
          "Each surrogate should be much simpler than the original task, and "
          "you must use a unique detection type for each. For a classification "
          "task, each surrogate's outputs must be a subset of the original "
          "task's outputs (if multiclass, may also output -1 for \"none of the "
          "above\"; if binary, output must be True or False).\n\n";

    os << "TASK:\n" << ctx.original_op->text << "\n\n";

    os << "FAILURE CASES:\n"
          "Here are examples of documents the current cascade fails to "
          "classify with any non-oracle task. Only the most relevant text span "
          "from each document is shown (as extracted by the oracle model):\n\n";
    if (ctx.failure_snippets.empty()) {
        os << "none\n\n";
    } else {
        for (const auto& snippet : ctx.failure_snippets) os << snippet << "\n\n";
    }

    os << "TASK STATISTICS:\nFor each candidate task:\n";
    for (const auto& stat : ctx.task_stats) {
        os << "- Task " << stat.config.key()
           << ": Selected: " << (stat.selected ? "yes" : "no")
           << "; Coverage: " << stat.coverage << "\n";
        for (const auto& ex : stat.hard_examples) os << "    Hard example: " << ex << "\n";
    }
    os << "\n";

    if (!ctx.prior_proposals.empty()) {
        os << "PREVIOUSLY GENERATED SURROGATES (propose operations distinct "
              "from these):\n";
        for (const auto& p : ctx.prior_proposals) os << "- " << p << "\n";
        os << "\n";
    }

    os << "INSTRUCTIONS:\nPropose " << n_s
       << " surrogate operations, each corresponding to a different detection "
          "type above and distinct from surrogates previously generated. "
          "Surrogates should be iteratively refined based on the task "
          "statistics and failure patterns above.\n\n"
          "For each surrogate, provide:\n\n"
          "PROMPT: <a concise classification instruction, with allowable "
          "outputs matching the original task>\n"
          "RATIONALE: <what it detects, which detection type it uses, and why "
          "it is simpler or complementary to previous surrogates>\n\n"
          "YOUR ANSWER HERE:\n";
    return os.str();
}

namespace {

std::string trim(std::string s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(s.front())) s.erase(s.begin());
    while (!s.empty() && is_space(s.back())) s.pop_back();
    return s;
}

// Finds the next "SURROGATE PROMPT:" or "PROMPT:" marker at or after `pos`.
// The main text and the appendix template disagree on the marker, so both
// are accepted.
std::size_t find_prompt_marker(const std::string& text, std::size_t pos,
                               std::size_t* content_start) {
    std::size_t a = text.find("SURROGATE PROMPT:", pos);
    std::size_t b = text.find("PROMPT:", pos);
    if (b != std::string::npos && a != std::string::npos && b >= a &&
        b < a + std::string("SURROGATE ").size() + 7)
        b = a;  // the PROMPT: inside SURROGATE PROMPT:
    std::size_t at = std::min(a, b);
    if (at == std::string::npos) return std::string::npos;
    std::size_t len = (at == a && a != std::string::npos)
                          ? std::string("SURROGATE PROMPT:").size()
                          : std::string("PROMPT:").size();
    if (content_start) *content_start = at + len;
    return at;
}

}  // namespace

std::vector<SurrogateProposal> parse_proposals(const std::string& agent_text,
                                               const ClassSet& classes,
                                               int round_index) {
    std::vector<SurrogateProposal> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t content_start = 0;
        std::size_t marker = find_prompt_marker(agent_text, pos, &content_start);
        if (marker == std::string::npos) break;
        std::size_t next_content = 0;
        std::size_t next_marker =
            find_prompt_marker(agent_text, content_start, &next_content);
        std::size_t block_end =
            next_marker == std::string::npos ? agent_text.size() : next_marker;

        std::size_t rationale = agent_text.find("RATIONALE:", content_start);
        if (rationale == std::string::npos || rationale >= block_end) {
            pos = block_end;  // prompt without rationale: skipped
            continue;
        }
        SurrogateProposal p;
        p.prompt_text = trim(agent_text.substr(content_start, rationale - content_start));
        p.rationale = trim(agent_text.substr(rationale + 10, block_end - rationale - 10));
        p.round_index = round_index;
        for (const auto& label : classes.labels)
            if (p.prompt_text.find(label) != std::string::npos)
                p.output_classes.push_back(label);
        if (p.prompt_text.find(kAbstainLabel) != std::string::npos)
            p.allows_abstain = true;
        if (p.output_classes.empty()) p.output_classes = classes.labels;  // inherited
        if (!p.prompt_text.empty()) out.push_back(std::move(p));
        pos = block_end;
    }
    if (out.empty()) throw std::runtime_error("agent output unparseable");
    return out;
}

std::optional<Rejection> validate_proposal(
    const SurrogateProposal& proposal, const ClassSet& classes,
    const std::vector<OperationPrompt>& registered) {
    if (proposal.prompt_text.empty()) return Rejection{"empty prompt"};
    for (const auto& c : proposal.output_classes)
        if (!classes.contains(c) && c != kAbstainLabel)
            return Rejection{"output class '" + c + "' outside the original classes"};
    if (proposal.allows_abstain && !classes.allows_abstain)
        return Rejection{"abstain not admitted for this class set"};
    for (const auto& op : registered)
        if (op.text == proposal.prompt_text)
            return Rejection{"duplicate of registered operation " + op.id};
    return std::nullopt;
}

namespace {

void score_config(const TaskConfig& config, const std::vector<PreparedDocument>& docs,
                  WorldIndex& world, CandidateScoreTable& table, Provider& provider,
                  const TokenCounter& counter) {
    const ModelRef& model = world.model(config.model);
    const OperationPrompt& op = world.op(config.op);
    for (const auto& doc : docs) {
        if (table.has(config, doc.id)) continue;
        ScoreRequest req;
        req.doc_id = doc.id;
        req.fraction = config.fraction;
        req.text = take_fraction(doc, config.fraction, counter);
        req.operation = &op;
        table.put(config, doc.id, provider.score(model, req));
    }
}

std::string truncate_to_tokens(const std::string& text, long budget,
                               const TokenCounter& counter) {
    if (counter(text) <= budget) return text;
    std::string out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        std::string next = out.empty() ? line : out + '\n' + line;
        if (counter(next) > budget) break;
        out = next;
    }
    if (out.empty()) out = text.substr(0, static_cast<std::size_t>(budget) * 4);
    return out;
}

}  // namespace

AgenticLoopResult agentic_loop(
    const std::vector<PreparedDocument>& dev_docs, WorldIndex& world,
    CandidateScoreTable& table, const ClassSet& classes,
    const OperationPrompt& original_op, const TaskConfig& oracle_config,
    Provider& provider, const std::optional<ModelRef>& agent_model,
    const std::vector<std::string>& candidate_models, const TokenCounter& counter,
    const AgenticLoopConfig& cfg, const ModelRef* snippet_oracle,
    const std::map<std::string, StandardizedDocument>* standardized) {
    AgenticLoopResult result;
    result.operations.push_back(original_op);

    for (const auto& m : candidate_models)
        for (double f : cfg.fractions)
            result.all_configs.push_back({m, original_op.id, f});
    for (const auto& config : result.all_configs)
        score_config(config, dev_docs, world, table, provider, counter);

    std::vector<std::string> dev_ids;
    for (const auto& d : dev_docs) dev_ids.push_back(d.id);

    AssemblyInputs in;
    in.docs = &dev_docs;
    in.gold = &table.gold_labels();
    in.table = &table;
    in.world = &world;
    in.counter = counter;
    in.alpha = cfg.alpha;

    auto assemble = [&]() {
        std::vector<Task> candidates;
        for (const auto& config : result.all_configs)
            if (auto task = find_thresholds(config, table, dev_ids,
                                            world.op(config.op).output_classes,
                                            cfg.alpha, cfg.g))
                candidates.push_back(std::move(*task));
        return greedy_assemble(candidates, oracle_config, in);
    };

    std::vector<std::string> prior_proposals;
    std::optional<Money> prev_cost;

    for (int round = 1; round <= cfg.n_a; ++round) {
        AssembledCascade best = assemble();
        result.rounds_run = round;
        if (prev_cost && best.dev_cost >= *prev_cost) break;  // no improvement
        prev_cost = best.dev_cost;
        if (!agent_model) break;

        // Context: failure cases are docs exiting at the oracle.
        AgentContext ctx;
        ctx.original_op = &original_op;
        ctx.prior_proposals = prior_proposals;
        TableScorer scorer(table);
        std::vector<std::string> failure_ids;
        for (const auto& doc : dev_docs) {
            DocResult r = run_cascade(best.cascade, doc, scorer, world, counter);
            if (r.exit_stage == static_cast<int>(best.cascade.oracle_stage()))
                failure_ids.push_back(doc.id);
        }
        for (const auto& id : failure_ids) {
            if (static_cast<int>(ctx.failure_snippets.size()) >= cfg.max_failure_docs)
                break;
            const PreparedDocument* doc = nullptr;
            for (const auto& d : dev_docs)
                if (d.id == id) doc = &d;
            std::string snippet = doc->full_text();
            if (snippet_oracle && standardized && standardized->count(id)) {
                try {
                    const StandardizedDocument& std_doc = standardized->at(id);
                    auto ranges = provider.relevant_ranges(*snippet_oracle, std_doc,
                                                           original_op);
                    std::string span;
                    for (const auto& r : merge_ranges(ranges))
                        for (int line = std::max(1, r.start_line);
                             line <= std::min(std_doc.line_count(), r.end_line); ++line) {
                            if (!span.empty()) span += '\n';
                            span += std_doc.lines[static_cast<std::size_t>(line - 1)];
                        }
                    if (!span.empty()) snippet = span;
                } catch (const std::runtime_error&) {
                    // fall back to the raw prefix
                }
            }
            ctx.failure_snippets.push_back(
                "[" + id + "] " +
                truncate_to_tokens(snippet, cfg.snippet_token_budget, counter));
        }

        // Per-task statistics with near-threshold hard examples.
        std::vector<Task> selected_tasks = best.cascade.tasks;
        for (const auto& config : result.all_configs) {
            TaskStat stat;
            stat.config = config;
            const Task* in_cascade = nullptr;
            for (const auto& t : selected_tasks)
                if (t.config == config) in_cascade = &t;
            stat.selected = in_cascade != nullptr;
            if (in_cascade) {
                std::vector<std::pair<double, std::string>> hard;  // margin, text
                for (const auto& doc : dev_docs) {
                    const ScoredPrediction& p = table.get(config, doc.id);
                    if (p.predicted == kAbstainLabel) continue;
                    auto it = in_cascade->thresholds.find(p.predicted);
                    if (it == in_cascade->thresholds.end()) continue;
                    if (p.confidence >= it->second) {
                        ++stat.coverage;
                        if (p.predicted != table.gold(doc.id))
                            hard.emplace_back(p.confidence - it->second,
                                              "[" + doc.id + "] predicted " +
                                                  p.predicted + " vs oracle " +
                                                  table.gold(doc.id));
                    }
                }
                std::sort(hard.begin(), hard.end());
                for (std::size_t i = 0; i < hard.size() && i < 10; ++i)
                    stat.hard_examples.push_back(hard[i].second);
            }
            ctx.task_stats.push_back(std::move(stat));
        }

        // Elicit, parse (one retry), validate.
        std::vector<SurrogateProposal> proposals;
        try {
            std::string prompt = build_agent_prompt(ctx, cfg.n_s);
            std::string reply = provider.generate(*agent_model, prompt);
            result.transcripts.push_back(reply);
            try {
                proposals = parse_proposals(reply, classes, round);
            } catch (const std::runtime_error&) {
                reply = provider.generate(*agent_model, prompt);
                result.transcripts.push_back(reply);
                try {
                    proposals = parse_proposals(reply, classes, round);
                } catch (const std::runtime_error&) {
                    proposals.clear();
                }
            }
        } catch (const std::runtime_error&) {
            break;  // agent provider unavailable: keep the current best
        }

        int accepted = 0;
        for (auto& p : proposals) {
            if (validate_proposal(p, classes, result.operations)) continue;
            OperationPrompt op;
            op.id = "sur_r" + std::to_string(round) + "_" +
                    std::to_string(++accepted);
            op.text = p.prompt_text;
            op.output_classes = p.output_classes;
            op.allows_abstain = p.allows_abstain;
            op.origin_round = round;
            world.add(op);
            result.operations.push_back(op);
            prior_proposals.push_back(p.prompt_text);
            for (const auto& m : candidate_models) {
                if (cfg.lite && world.model(m).role == ModelRole::oracle) continue;
                for (double f : cfg.fractions) {
                    TaskConfig config{m, op.id, f};
                    score_config(config, dev_docs, world, table, provider, counter);
                    result.all_configs.push_back(config);
                }
            }
        }
        if (accepted == 0) break;  // counts as a no-improvement round
    }

    result.final_cascade = assemble();
    return result;
}

}  // namespace cascades
