#include "cascades/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "json.hpp"

namespace cascades {

using nlohmann::json;

OperationPrompt TaskSpec::original_op() const {
    OperationPrompt op;
    op.id = "op_orig";
    op.text = operation_text;
    op.output_classes = classes.labels;
    op.allows_abstain = false;
    op.origin_round = -1;
    return op;
}

TaskSpec TaskSpec::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("task spec: ") + e.what());
    }
    TaskSpec t;
    if (!j.contains("operation") || !j["operation"].is_string())
        throw std::invalid_argument("task spec: missing string field 'operation'");
    t.operation_text = j["operation"].get<std::string>();
    if (!j.contains("classes") || !j["classes"].is_array() || j["classes"].empty())
        throw std::invalid_argument("task spec: 'classes' must be a non-empty array");
    for (const auto& c : j["classes"]) t.classes.labels.push_back(c.get<std::string>());
    t.classes.allows_abstain =
        j.value("allows_abstain", t.classes.labels.size() > 2);
    return t;
}

// ---------------------------------------------------------------------------
// Artifact serialization

namespace {

json threshold_to_json(double t) {
    if (std::isinf(t)) return json("inf");
    return json(t);
}

double threshold_from_json(const json& j) {
    if (j.is_string()) return kInfThreshold;
    return j.get<double>();
}

json task_to_json(const Task& t) {
    json thresholds;
    for (const auto& [c, tau] : t.thresholds) thresholds[c] = threshold_to_json(tau);
    return json{{"model", t.config.model},
                {"op", t.config.op},
                {"fraction", t.config.fraction},
                {"thresholds", thresholds}};
}

Task task_from_json(const json& j) {
    Task t;
    t.config.model = j.at("model").get<std::string>();
    t.config.op = j.at("op").get<std::string>();
    t.config.fraction = j.at("fraction").get<double>();
    for (const auto& [c, tau] : j.at("thresholds").items())
        t.thresholds[c] = threshold_from_json(tau);
    return t;
}

json op_to_json(const OperationPrompt& op) {
    return json{{"id", op.id},
                {"text", op.text},
                {"output_classes", op.output_classes},
                {"allows_abstain", op.allows_abstain},
                {"origin_round", op.origin_round}};
}

OperationPrompt op_from_json(const json& j) {
    OperationPrompt op;
    op.id = j.at("id").get<std::string>();
    op.text = j.at("text").get<std::string>();
    op.output_classes = j.at("output_classes").get<std::vector<std::string>>();
    op.allows_abstain = j.at("allows_abstain").get<bool>();
    op.origin_round = j.at("origin_round").get<int>();
    return op;
}

json opt_cost_to_json(const OptCostReport& r) { return json::parse(r.to_json_text()); }

OptCostReport opt_cost_from_json(const json& j) {
    OptCostReport r;
    r.c_labels = Money{j.at("c_labels_pico").get<std::int64_t>()};
    r.c_doc = Money{j.at("c_doc_pico").get<std::int64_t>()};
    r.c_eval = Money{j.at("c_eval_pico").get<std::int64_t>()};
    r.c_agent = Money{j.at("c_agent_pico").get<std::int64_t>()};
    r.c_opt = Money{j.at("c_opt_pico").get<std::int64_t>()};
    r.s_f = j.at("s_f").get<double>();
    const json& p = j.at("params");
    r.params.n_docs = p.at("N").get<long>();
    r.params.avg_doc_tokens = p.at("L").get<long>();
    r.params.prompt_tokens = p.at("P").get<long>();
    r.params.fractions = p.at("fractions").get<std::vector<double>>();
    r.params.n_s = p.at("n_s").get<int>();
    r.params.n_a = p.at("n_a").get<int>();
    r.params.lite = p.at("lite").get<bool>();
    return r;
}

}  // namespace

std::string CascadeArtifact::to_json_text() const {
    json j;
    j["version"] = version;
    j["config"] = json::parse(run_config_to_json_text(config));
    j["task"] = json{{"operation", task.operation_text},
                     {"classes", task.classes.labels},
                     {"allows_abstain", task.classes.allows_abstain}};
    json ops = json::array();
    for (const auto& op : operations) ops.push_back(op_to_json(op));
    j["operations"] = ops;
    if (relevance) j["relevance"] = json::parse(relevance->to_json_text());
    json tasks = json::array();
    for (const auto& t : cascade.tasks) tasks.push_back(task_to_json(t));
    j["cascade"] = json{{"tasks", tasks},
                        {"oracle",
                         json{{"model", cascade.oracle.model},
                              {"op", cascade.oracle.op},
                              {"fraction", cascade.oracle.fraction}}}};
    json base = json::array();
    for (const auto& t : base_tasks) base.push_back(task_to_json(t));
    j["base_tasks"] = base;
    j["guarantee_requested"] = guarantee_requested;
    j["guarantee_found"] = guarantee_found;
    j["shift"] = shift;
    j["split_seed"] = split_seed;
    j["validation_order"] = validation_order;
    j["dev_doc_ids"] = dev_doc_ids;
    j["dev_cost_pico"] = dev_cost.pico;
    j["dev_accuracy"] = dev_accuracy;
    j["opt_cost"] = opt_cost_to_json(opt_cost);
    return j.dump(2) + "\n";
}

CascadeArtifact CascadeArtifact::from_json_text(const std::string& text) {
    json j = json::parse(text);
    CascadeArtifact a;
    a.version = j.at("version").get<int>();
    if (a.version != 1)
        throw std::runtime_error("unknown artifact version " +
                                 std::to_string(a.version));
    a.config = run_config_from_json_text(j.at("config").dump());
    a.task.operation_text = j.at("task").at("operation").get<std::string>();
    a.task.classes.labels =
        j.at("task").at("classes").get<std::vector<std::string>>();
    a.task.classes.allows_abstain = j.at("task").at("allows_abstain").get<bool>();
    for (const auto& jo : j.at("operations")) a.operations.push_back(op_from_json(jo));
    if (j.contains("relevance"))
        a.relevance = RelevanceModel::from_json_text(j["relevance"].dump());
    for (const auto& jt : j.at("cascade").at("tasks"))
        a.cascade.tasks.push_back(task_from_json(jt));
    const json& jo = j.at("cascade").at("oracle");
    a.cascade.oracle = {jo.at("model").get<std::string>(),
                        jo.at("op").get<std::string>(),
                        jo.at("fraction").get<double>()};
    for (const auto& jt : j.at("base_tasks")) a.base_tasks.push_back(task_from_json(jt));
    a.guarantee_requested = j.at("guarantee_requested").get<bool>();
    a.guarantee_found = j.at("guarantee_found").get<bool>();
    a.shift = j.at("shift").get<int>();
    a.split_seed = j.at("split_seed").get<std::uint64_t>();
    a.validation_order = j.at("validation_order").get<std::vector<std::string>>();
    a.dev_doc_ids = j.at("dev_doc_ids").get<std::vector<std::string>>();
    a.dev_cost = Money{j.at("dev_cost_pico").get<std::int64_t>()};
    a.dev_accuracy = j.at("dev_accuracy").get<double>();
    a.opt_cost = opt_cost_from_json(j.at("opt_cost"));
    return a;
}

// ---------------------------------------------------------------------------
// Optimization

namespace {

std::vector<std::string> shuffled_ids(std::vector<std::string> ids,
                                      std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    return ids;
}

}  // namespace

OptimizeResult optimize(const std::vector<Document>& corpus, const TaskSpec& task,
                        const RunConfig& cfg, Provider& raw_provider) {
    cfg.validate();
    if (corpus.empty()) throw std::invalid_argument("empty corpus");
    const ModelRef* oracle = cfg.find_role(ModelRole::oracle);
    if (!oracle) throw std::invalid_argument("config declares no oracle model");
    std::vector<std::string> proxy_names;
    for (const auto& m : cfg.models)
        if (m.role == ModelRole::proxy) proxy_names.push_back(m.name);
    if (proxy_names.empty())
        throw std::invalid_argument("config declares no proxy model");
    const ModelRef* agent = cfg.find_role(ModelRole::agent);
    const ModelRef* embedder = cfg.find_role(ModelRole::embedder);
    TokenCounter counter = token_counter_by_id(cfg.token_counter);
    OperationPrompt original_op = task.original_op();

    CachingProvider provider(raw_provider);

    // Seeded dev sample.
    std::vector<std::string> all_ids;
    std::map<std::string, const Document*> by_id;
    for (const auto& d : corpus) {
        all_ids.push_back(d.id);
        by_id[d.id] = &d;
    }
    std::vector<std::string> dev_ids =
        shuffled_ids(all_ids, derive_seed(cfg.seed, "dev-sample"));
    dev_ids.resize(std::min<std::size_t>(dev_ids.size(),
                                         static_cast<std::size_t>(cfg.dev_size)));
    if (cfg.guarantee && dev_ids.size() < 150)
        throw std::invalid_argument(
            "guarantee requires a dev set of at least 150 documents");

    // Oracle labels (full raw document, original operation).
    std::map<std::string, ClassLabel> gold;
    for (const auto& id : dev_ids) {
        ScoreRequest req;
        req.doc_id = id;
        req.fraction = 1.0;
        req.text = by_id[id]->text;
        req.operation = &original_op;
        gold[id] = provider.score(*oracle, req).predicted;
    }

    // Restructuring: granularity search, relevance classifier, reorder.
    std::optional<RelevanceModel> relevance;
    std::map<std::string, StandardizedDocument> standardized;
    std::vector<PreparedDocument> dev_docs;
    if (embedder) {
        std::vector<StandardizedDocument> std_docs;
        for (const auto& id : dev_ids) {
            standardized[id] = standardize(*by_id[id], cfg.line_width);
            std_docs.push_back(standardized[id]);
        }
        GranularityResult gran = find_granularity(std_docs, gold, provider, *oracle,
                                                  original_op, cfg.alpha, cfg.e_max);
        std::vector<std::string> ranged_ids;
        for (const auto& [id, r] : gran.ranges) ranged_ids.push_back(id);
        if (!ranged_ids.empty()) {
            std::vector<std::string> order =
                shuffled_ids(ranged_ids, derive_seed(cfg.seed, "chunk-split"));
            std::size_t n_train = std::max<std::size_t>(1, order.size() * 8 / 10);
            std::vector<std::string> train_ids(order.begin(), order.begin() + n_train);
            std::vector<std::string> test_ids(order.begin() + n_train, order.end());
            if (test_ids.empty()) test_ids = train_ids;
            ChunkDataset data = build_training_set(std_docs, gran.ranges,
                                                   gran.granularity, train_ids,
                                                   test_ids);
            try {
                relevance = train_relevance(data, provider, *embedder, original_op,
                                            gran.granularity);
            } catch (const std::runtime_error&) {
                relevance.reset();  // degenerate chunk labels: keep raw order
            }
        }
    }
    for (const auto& id : dev_ids) {
        PreparedDocument p;
        if (relevance) {
            RestructuredDocument r =
                reorder(standardized[id], *relevance, provider, *embedder);
            p = r.prepared();
        } else {
            p = PreparedDocument::from_raw(*by_id[id]);
        }
        p.gold_label = gold[id];
        dev_docs.push_back(std::move(p));
    }

    // Candidate world and the surrogate loop.
    WorldIndex world;
    for (const auto& m : cfg.models) world.add(m);
    world.add(original_op);
    CandidateScoreTable table;
    for (const auto& [id, label] : gold) table.set_gold(id, label);
    TaskConfig oracle_config{oracle->name, original_op.id, 1.0};

    std::vector<std::string> candidate_models = proxy_names;
    candidate_models.push_back(oracle->name);

    AgenticLoopConfig loop_cfg;
    loop_cfg.alpha = cfg.alpha;
    loop_cfg.g = cfg.g;
    loop_cfg.n_s = cfg.n_s;
    loop_cfg.n_a = agent ? cfg.n_a : 0;
    loop_cfg.lite = cfg.lite;
    loop_cfg.fractions = cfg.fractions;

    std::optional<ModelRef> agent_model;
    if (agent) agent_model = *agent;
    AgenticLoopResult loop = agentic_loop(
        dev_docs, world, table, task.classes, original_op, oracle_config, provider,
        agent_model, candidate_models, counter, loop_cfg, oracle,
        standardized.empty() ? nullptr : &standardized);

    // Optional certification on a fresh D_T / D_V split.
    CascadeArtifact artifact;
    artifact.guarantee_requested = cfg.guarantee;
    Cascade final_cascade = loop.final_cascade.cascade;
    artifact.base_tasks = final_cascade.tasks;
    if (cfg.guarantee) {
        SplitPair split =
            split_dev(dev_ids, derive_seed(cfg.seed, "guarantee-split"));
        artifact.split_seed = split.split_seed;
        std::vector<Task> candidates;
        for (const auto& config : loop.all_configs)
            if (auto t = find_thresholds(config, table, split.train_ids,
                                         world.op(config.op).output_classes,
                                         cfg.alpha, cfg.g))
                candidates.push_back(std::move(*t));
        std::vector<PreparedDocument> train_docs, validation_docs;
        for (const auto& d : dev_docs) {
            bool in_train = std::find(split.train_ids.begin(), split.train_ids.end(),
                                      d.id) != split.train_ids.end();
            (in_train ? train_docs : validation_docs).push_back(d);
        }
        // Validation docs in the certified (shuffled) order.
        std::vector<PreparedDocument> ordered_validation;
        for (const auto& id : split.validation_ids)
            for (const auto& d : validation_docs)
                if (d.id == id) ordered_validation.push_back(d);
        AssemblyInputs in;
        in.docs = &train_docs;
        in.gold = &table.gold_labels();
        in.table = &table;
        in.world = &world;
        in.counter = counter;
        in.alpha = cfg.alpha;
        in.include_output_cost = cfg.include_output_cost;
        AssembledCascade trained = greedy_assemble(candidates, oracle_config, in);
        artifact.base_tasks = trained.cascade.tasks;
        std::optional<CertifiedCascade> cert = adjust_thresholds(
            trained.cascade, table, ordered_validation, split.train_ids, world,
            counter, cfg.alpha, cfg.delta, cfg.s_max);
        if (cert) {
            final_cascade = cert->cascade;
            artifact.guarantee_found = true;
            artifact.shift = cert->shift;
            artifact.validation_order = cert->validation_order;
        } else {
            final_cascade = Cascade{{}, oracle_config};  // NotFound fallback
            artifact.validation_order = split.validation_ids;
        }
    }

    // Dev evaluation of the artifact cascade (table-backed, no new calls).
    TableScorer scorer(table);
    EvalReport report = evaluate(final_cascade, dev_docs, table.gold_labels(),
                                 scorer, world, counter, cfg.include_output_cost);

    artifact.config = cfg;
    artifact.task = task;
    artifact.operations = loop.operations;
    artifact.relevance = relevance;
    artifact.cascade = final_cascade;
    artifact.dev_doc_ids = dev_ids;
    artifact.dev_cost = report.total_cost;
    artifact.dev_accuracy = report.overall_accuracy;

    OptCostParams params;
    params.n_docs = static_cast<long>(dev_docs.size());
    long token_sum = 0;
    for (const auto& d : dev_docs) token_sum += counter(d.full_text());
    params.avg_doc_tokens =
        dev_docs.empty() ? 0 : token_sum / static_cast<long>(dev_docs.size());
    params.prompt_tokens = counter(original_op.text);
    params.fractions = cfg.fractions;
    params.n_s = cfg.n_s;
    params.n_a = loop.rounds_run;
    params.lambda_oracle = oracle->prices.in_new;
    params.lambda_proxy = cfg.model(proxy_names.front()).prices.in_new;
    if (embedder) params.lambda_embed = embedder->prices.in_new;
    if (agent) {
        params.lambda_agent_in = agent->prices.in_new;
        params.lambda_agent_out = agent->prices.out;
        AgentUsage usage = provider.agent_usage();
        int rounds = std::max(1, loop.rounds_run);
        params.agent_input_tokens = usage.input_tokens / rounds;
        params.agent_output_tokens = usage.output_tokens / rounds;
    }
    params.lite = cfg.lite;
    artifact.opt_cost = optimization_cost(params);

    return OptimizeResult{std::move(artifact), std::move(report)};
}

// ---------------------------------------------------------------------------
// Two-model-cascade baseline

Task baseline_two_model(const TaskConfig& proxy_config,
                        const CandidateScoreTable& table,
                        const std::vector<std::string>& dev_doc_ids,
                        const std::vector<ClassLabel>& output_classes,
                        double alpha) {
    Task t;
    t.config = proxy_config;
    const double n = static_cast<double>(dev_doc_ids.size());
    for (const auto& c : output_classes) {
        // Docs the proxy assigns to class c, with confidence and correctness.
        std::vector<std::pair<double, bool>> preds;
        for (const auto& id : dev_doc_ids) {
            const ScoredPrediction& p = table.get(proxy_config, id);
            if (p.predicted == c) preds.emplace_back(p.confidence, table.gold(id) == c);
        }
        std::vector<double> grid;
        for (const auto& [conf, correct] : preds) grid.push_back(conf);
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        double chosen = kInfThreshold;
        for (double tau : grid) {
            long exit_correct = 0, exit_total = 0;
            for (const auto& [conf, correct] : preds)
                if (conf >= tau) {
                    ++exit_total;
                    if (correct) ++exit_correct;
                }
            // Docs below the bar (or other classes) go to the oracle, which
            // is correct by definition against its own labels.
            double combined = (static_cast<double>(exit_correct) + n -
                               static_cast<double>(exit_total)) /
                              n;
            if (combined >= alpha) {
                chosen = tau;
                break;
            }
        }
        t.thresholds[c] = chosen;
    }
    return t;
}

// ---------------------------------------------------------------------------
// Simulation sweeps

Scenario Scenario::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("scenario: ") + e.what());
    }
    Scenario s;
    if (!j.contains("config"))
        throw std::invalid_argument("scenario: missing field 'config'");
    s.config = run_config_from_json_text(j["config"].dump());
    if (!j.contains("task"))
        throw std::invalid_argument("scenario: missing field 'task'");
    s.task = TaskSpec::from_json_text(j["task"].dump());
    if (!j.contains("corpus") || !j["corpus"].is_array() || j["corpus"].empty())
        throw std::invalid_argument("scenario: 'corpus' must be a non-empty array");
    for (const auto& jd : j["corpus"]) {
        Document d;
        d.id = jd.at("id").get<std::string>();
        d.text = jd.at("text").get<std::string>();
        s.corpus.push_back(std::move(d));
    }
    if (!j.contains("fixtures"))
        throw std::invalid_argument("scenario: missing field 'fixtures'");
    s.fixture_json = j["fixtures"].dump();
    if (!j.contains("alpha_grid") || !j["alpha_grid"].is_array() ||
        j["alpha_grid"].empty())
        throw std::invalid_argument("scenario: 'alpha_grid' must be a non-empty array");
    s.alpha_grid = j["alpha_grid"].get<std::vector<double>>();
    return s;
}

std::vector<SweepRow> simulate_sweep(const Scenario& scenario) {
    std::vector<SweepRow> rows;
    const ModelRef* oracle = scenario.config.find_role(ModelRole::oracle);
    const ModelRef* proxy = scenario.config.find_role(ModelRole::proxy);
    if (!oracle || !proxy)
        throw std::invalid_argument("scenario config needs a proxy and an oracle");
    TokenCounter counter = token_counter_by_id(scenario.config.token_counter);

    for (double alpha : scenario.alpha_grid) {
        RunConfig cfg = scenario.config;
        cfg.alpha = alpha;

        // Task cascade: full optimize on a fresh provider so scripted reply
        // sequences replay from the start.
        {
            ScriptedProvider provider =
                ScriptedProvider::from_json_text(scenario.fixture_json);
            OptimizeResult r = optimize(scenario.corpus, scenario.task, cfg, provider);
            SweepRow row;
            row.alpha = alpha;
            row.method = "task_cascade";
            row.total_cost = r.artifact.dev_cost;
            row.mean_cost_usd = r.dev_report.mean_cost_usd;
            row.accuracy = r.artifact.dev_accuracy;
            rows.push_back(row);
        }

        // Baseline: proxy on the full raw document with per-class minimal
        // thresholds, then the oracle.
        {
            ScriptedProvider provider =
                ScriptedProvider::from_json_text(scenario.fixture_json);
            OperationPrompt op = scenario.task.original_op();
            WorldIndex world;
            for (const auto& m : cfg.models) world.add(m);
            world.add(op);
            std::vector<std::string> ids;
            std::vector<PreparedDocument> docs;
            for (const auto& d : scenario.corpus) {
                ids.push_back(d.id);
                docs.push_back(PreparedDocument::from_raw(d));
            }
            std::vector<std::string> dev_ids =
                shuffled_ids(ids, derive_seed(cfg.seed, "dev-sample"));
            dev_ids.resize(std::min<std::size_t>(
                dev_ids.size(), static_cast<std::size_t>(cfg.dev_size)));
            CandidateScoreTable table;
            TaskConfig proxy_config{proxy->name, op.id, 1.0};
            TaskConfig oracle_config{oracle->name, op.id, 1.0};
            std::vector<PreparedDocument> dev_docs;
            for (const auto& id : dev_ids)
                for (const auto& d : docs)
                    if (d.id == id) dev_docs.push_back(d);
            for (const auto& d : dev_docs) {
                ScoreRequest req;
                req.doc_id = d.id;
                req.fraction = 1.0;
                req.text = d.full_text();
                req.operation = &op;
                table.put(proxy_config, d.id, provider.score(*proxy, req));
                ScoredPrediction gold_pred = provider.score(*oracle, req);
                table.put(oracle_config, d.id, gold_pred);
                table.set_gold(d.id, gold_pred.predicted);
            }
            Task stage = baseline_two_model(proxy_config, table, dev_ids,
                                            op.output_classes, alpha);
            Cascade cascade{{stage}, oracle_config};
            TableScorer scorer(table);
            EvalReport report =
                evaluate(cascade, dev_docs, table.gold_labels(), scorer, world,
                         counter, cfg.include_output_cost);
            SweepRow row;
            row.alpha = alpha;
            row.method = "two_model_baseline";
            row.total_cost = report.total_cost;
            row.mean_cost_usd = report.mean_cost_usd;
            row.accuracy = report.overall_accuracy;
            rows.push_back(row);
        }
    }
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "alpha,method,total_cost_pico,mean_cost_usd,accuracy\n";
    for (const auto& r : rows)
        os << json(r.alpha).dump() << ',' << r.method << ',' << r.total_cost.pico
           << ',' << json(r.mean_cost_usd).dump() << ',' << json(r.accuracy).dump()
           << '\n';
    return os.str();
}

}  // namespace cascades
