#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "cascades/core.hpp"

namespace cascades {

// Largest token-length document prefix previously sent, per (model name,
// document id). Confined to a single document's cascade execution; dropped
// afterward.
class CacheState {
  public:
    long largest_prefix(const std::string& model, const std::string& doc_id) const;
    void record(const std::string& model, const std::string& doc_id, long tokens);

  private:
    std::map<std::pair<std::string, std::string>, long> prefix_;
};

struct CostBreakdown {
    long new_input_tokens = 0;
    long cached_input_tokens = 0;
    long operation_tokens = 0;
    long output_tokens = 0;
    Money money;         // exactly the priced sum of the token fields
    int exit_stage = 0;  // j*; oracle = k+1
};

// Two-case prefix-caching formula. First call for (model, doc):
//   (|x_f| + |o|) * in_new
// otherwise, with p = min(prior prefix, |x_f|):
//   p * in_cached + (|x_f| - p) * in_new + |o| * in_new
// Output tokens are excluded unless priced explicitly via output_tokens > 0.
CostBreakdown task_cost(long doc_tokens, long op_tokens, const ModelPrices& prices,
                        const std::string& model, const std::string& doc_id,
                        CacheState& cache, long output_tokens = 0);

// Exact sum of a single document's trace, up to and including the exit stage.
Money cascade_cost(std::span<const CostBreakdown> trace);

struct OptCostParams {
    long n_docs = 0;            // N
    long avg_doc_tokens = 0;    // L
    long prompt_tokens = 0;     // P (operation tokens per call)
    std::vector<double> fractions;
    int n_s = 0;
    int n_a = 0;
    Money lambda_oracle;        // per input token
    Money lambda_proxy;
    Money lambda_embed;
    Money lambda_agent_in;
    Money lambda_agent_out;
    long agent_input_tokens = 0;   // T_agent per round
    long agent_output_tokens = 0;  // O_agent per round
    bool lite = false;
};

struct OptCostReport {
    Money c_labels;
    Money c_doc;
    Money c_eval;
    Money c_agent;
    Money c_opt;  // = c_doc + c_eval + c_agent
    OptCostParams params;
    double s_f = 0.0;  // sum of fractions

    std::string to_json_text() const;
};

// Offline optimization-cost accounting:
//   C_labels = N (L+P) lambda_o
//   C_doc    = N (L+P) (2 lambda_o) + N L lambda_emb
//   C_eval   = N n_s n_a [ L S_f (lambda_o + lambda_p) + P |F| (lambda_o + lambda_p) ]
//              (lambda_p alone in lite mode)
//   C_agent  = n_a (T_agent lambda_agent_in + O_agent lambda_agent_out)
OptCostReport optimization_cost(const OptCostParams& params);

}  // namespace cascades
