#include "cascades/costmodel.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace cascades {

long CacheState::largest_prefix(const std::string& model,
                                const std::string& doc_id) const {
    auto it = prefix_.find({model, doc_id});
    return it == prefix_.end() ? -1 : it->second;
}

void CacheState::record(const std::string& model, const std::string& doc_id,
                        long tokens) {
    auto& slot = prefix_[{model, doc_id}];
    slot = std::max(slot, tokens);
}

CostBreakdown task_cost(long doc_tokens, long op_tokens, const ModelPrices& prices,
                        const std::string& model, const std::string& doc_id,
                        CacheState& cache, long output_tokens) {
    CostBreakdown b;
    b.operation_tokens = op_tokens;
    b.output_tokens = output_tokens;
    long prior = cache.largest_prefix(model, doc_id);
    if (prior < 0) {
        b.new_input_tokens = doc_tokens;
    } else {
        long cached = std::min(prior, doc_tokens);
        b.cached_input_tokens = cached;
        b.new_input_tokens = doc_tokens - cached;
    }
    b.money = b.new_input_tokens * prices.in_new +
              b.cached_input_tokens * prices.in_cached +
              b.operation_tokens * prices.in_new + b.output_tokens * prices.out;
    cache.record(model, doc_id, doc_tokens);
    return b;
}

Money cascade_cost(std::span<const CostBreakdown> trace) {
    Money total;
    for (const auto& b : trace) total += b.money;
    return total;
}

OptCostReport optimization_cost(const OptCostParams& p) {
    OptCostReport r;
    r.params = p;
    for (double f : p.fractions) r.s_f += f;

    const long lp = p.avg_doc_tokens + p.prompt_tokens;  // L + P
    r.c_labels = p.n_docs * lp * p.lambda_oracle;
    r.c_doc = Money{2 * p.n_docs * lp * p.lambda_oracle.pico} +
              p.n_docs * p.avg_doc_tokens * p.lambda_embed;

    Money eval_rate = p.lite ? p.lambda_proxy
                             : p.lambda_oracle + p.lambda_proxy;
    double eval_tokens =
        static_cast<double>(p.n_docs) * p.n_s * p.n_a *
        (static_cast<double>(p.avg_doc_tokens) * r.s_f +
         static_cast<double>(p.prompt_tokens) * static_cast<double>(p.fractions.size()));
    r.c_eval = Money{static_cast<std::int64_t>(
        std::llround(eval_tokens * static_cast<double>(eval_rate.pico)))};

    r.c_agent = p.n_a * (p.agent_input_tokens * p.lambda_agent_in +
                         p.agent_output_tokens * p.lambda_agent_out);
    r.c_opt = r.c_doc + r.c_eval + r.c_agent;
    return r;
}

std::string OptCostReport::to_json_text() const {
    nlohmann::json j;
    j["c_labels_pico"] = c_labels.pico;
    j["c_doc_pico"] = c_doc.pico;
    j["c_eval_pico"] = c_eval.pico;
    j["c_agent_pico"] = c_agent.pico;
    j["c_opt_pico"] = c_opt.pico;
    j["c_opt_usd"] = c_opt.usd();
    j["s_f"] = s_f;
    j["params"] = {{"N", params.n_docs},     {"L", params.avg_doc_tokens},
                   {"P", params.prompt_tokens}, {"fractions", params.fractions},
                   {"n_s", params.n_s},      {"n_a", params.n_a},
                   {"lite", params.lite}};
    return j.dump(2);
}

}  // namespace cascades
