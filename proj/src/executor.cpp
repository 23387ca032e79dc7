#include "cascades/executor.hpp"

#include <stdexcept>

#include "json.hpp"

namespace cascades {

using nlohmann::json;

const ModelRef& WorldIndex::model(const std::string& name) const {
    auto it = models.find(name);
    if (it == models.end()) throw std::invalid_argument("unknown model: " + name);
    return it->second;
}

const OperationPrompt& WorldIndex::op(const std::string& id) const {
    auto it = ops.find(id);
    if (it == ops.end()) throw std::invalid_argument("unknown operation: " + id);
    return it->second;
}

ScoredPrediction ProviderScorer::score_task(const TaskConfig& config,
                                            const PreparedDocument& doc) {
    ScoreRequest req;
    req.doc_id = doc.id;
    req.fraction = config.fraction;
    req.text = take_fraction(doc, config.fraction, counter_);
    const OperationPrompt& op = world_.op(config.op);
    req.operation = &op;
    try {
        return provider_.score(world_.model(config.model), req);
    } catch (const std::runtime_error& e) {
        if (std::string_view(e.what()).find("provider unavailable") !=
            std::string_view::npos)
            throw ProviderError(e.what());
        throw;
    }
}

namespace {

CostBreakdown stage_cost(const TaskConfig& config, const PreparedDocument& doc,
                         const WorldIndex& world, const TokenCounter& counter,
                         CacheState& cache, bool include_output_cost) {
    const ModelRef& model = world.model(config.model);
    const OperationPrompt& op = world.op(config.op);
    long doc_tokens = counter(take_fraction(doc, config.fraction, counter));
    long op_tokens = counter(op.text);
    // Classification output is one label; priced only when opted in.
    long out_tokens = include_output_cost ? 1 : 0;
    return task_cost(doc_tokens, op_tokens, model.prices, model.name, doc.id,
                     cache, out_tokens);
}

Money trace_total(const std::vector<StageRecord>& stages) {
    std::vector<CostBreakdown> trace;
    trace.reserve(stages.size());
    for (const auto& s : stages) trace.push_back(s.cost);
    return cascade_cost(trace);
}

}  // namespace

DocResult run_cascade(const Cascade& cascade, const PreparedDocument& doc,
                      Scorer& scorer, const WorldIndex& world,
                      const TokenCounter& counter, bool include_output_cost) {
    DocResult result;
    result.doc_id = doc.id;
    CacheState cache;  // fresh session per document
    try {
        for (std::size_t i = 0; i < cascade.tasks.size(); ++i) {
            const Task& task = cascade.tasks[i];
            StageRecord rec;
            rec.config = task.config;
            rec.prediction = scorer.score_task(task.config, doc);
            rec.cost = stage_cost(task.config, doc, world, counter, cache,
                                  include_output_cost);
            const ClassLabel& pred = rec.prediction.predicted;
            bool exits = false;
            if (pred != kAbstainLabel) {
                auto it = task.thresholds.find(pred);
                if (it == task.thresholds.end())
                    throw std::logic_error("no threshold for class " + pred);
                exits = rec.prediction.confidence >= it->second;
            }
            result.stages.push_back(std::move(rec));
            if (exits) {
                result.exit_stage = static_cast<int>(i) + 1;
                result.stages.back().cost.exit_stage = result.exit_stage;
                result.prediction = result.stages.back().prediction.predicted;
                result.total_cost = trace_total(result.stages);
                return result;
            }
        }
        // Terminal oracle stage: always accepts.
        StageRecord rec;
        rec.config = cascade.oracle;
        rec.prediction = scorer.score_task(cascade.oracle, doc);
        rec.cost = stage_cost(cascade.oracle, doc, world, counter, cache,
                              include_output_cost);
        result.exit_stage = static_cast<int>(cascade.oracle_stage());
        rec.cost.exit_stage = result.exit_stage;
        result.prediction = rec.prediction.predicted;
        result.stages.push_back(std::move(rec));
        result.total_cost = trace_total(result.stages);
        return result;
    } catch (const ProviderError&) {
        result.failed = true;
        result.stages.clear();
        result.total_cost = Money{};
        return result;
    }
}

EvalReport evaluate(const Cascade& cascade, std::span<const PreparedDocument> docs,
                    const std::map<std::string, ClassLabel>& oracle_labels,
                    Scorer& scorer, const WorldIndex& world,
                    const TokenCounter& counter, bool include_output_cost) {
    if (docs.empty()) throw std::invalid_argument("empty dev set");
    EvalReport report;
    int n_stages = static_cast<int>(cascade.oracle_stage());
    std::vector<long> correct(n_stages + 1, 0), total(n_stages + 1, 0);
    for (const auto& doc : docs) {
        auto label_it = oracle_labels.find(doc.id);
        if (label_it == oracle_labels.end())
            throw std::invalid_argument("missing oracle label for doc " + doc.id);
        DocResult r = run_cascade(cascade, doc, scorer, world, counter,
                                  include_output_cost);
        if (r.failed) {
            ++report.n_failed;
            report.traces.push_back(std::move(r));
            continue;
        }
        ++total[r.exit_stage];
        if (r.prediction == label_it->second) ++correct[r.exit_stage];
        report.total_cost += r.total_cost;
        ++report.n_docs;
        report.traces.push_back(std::move(r));
    }
    long correct_sum = 0;
    for (int s = 1; s <= n_stages; ++s) {
        StageSummary sum;
        sum.stage = s;
        sum.coverage = total[s];
        if (total[s] > 0)
            sum.accuracy = static_cast<double>(correct[s]) / static_cast<double>(total[s]);
        correct_sum += correct[s];
        report.stages.push_back(sum);
    }
    if (report.n_docs > 0) {
        report.overall_accuracy =
            static_cast<double>(correct_sum) / static_cast<double>(report.n_docs);
        report.mean_cost_usd = report.total_cost.usd() / static_cast<double>(report.n_docs);
    }
    return report;
}

std::string doc_result_to_json(const DocResult& r) {
    json j;
    j["id"] = r.doc_id;
    j["failed"] = r.failed;
    j["exit_stage"] = r.exit_stage;
    j["label"] = r.prediction;
    j["cost_pico"] = r.total_cost.pico;
    json stages = json::array();
    for (const auto& s : r.stages) {
        stages.push_back({{"model", s.config.model},
                          {"op", s.config.op},
                          {"fraction", s.config.fraction},
                          {"predicted", s.prediction.predicted},
                          {"confidence", s.prediction.confidence},
                          {"new_input_tokens", s.cost.new_input_tokens},
                          {"cached_input_tokens", s.cost.cached_input_tokens},
                          {"operation_tokens", s.cost.operation_tokens},
                          {"money_pico", s.cost.money.pico}});
    }
    j["stages"] = stages;
    return j.dump();
}

std::string EvalReport::to_json_text() const {
    json j;
    j["overall_accuracy"] = overall_accuracy;
    j["total_cost_pico"] = total_cost.pico;
    j["total_cost_usd"] = total_cost.usd();
    j["mean_cost_usd"] = mean_cost_usd;
    j["n_docs"] = n_docs;
    j["n_failed"] = n_failed;
    json stages = json::array();
    for (const auto& s : this->stages) {
        json js = {{"stage", s.stage}, {"coverage", s.coverage}};
        if (s.accuracy) js["accuracy"] = *s.accuracy;
        stages.push_back(js);
    }
    j["stages"] = stages;
    return j.dump(2);
}

}  // namespace cascades
