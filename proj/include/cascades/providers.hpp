#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "cascades/core.hpp"

namespace cascades {

struct ScoredPrediction {
    // Class -> probability, ordered by the operation's output class order.
    std::vector<std::pair<ClassLabel, double>> distribution;
    ClassLabel predicted;    // argmax, ties broken by class order
    double confidence = 0;   // probability of predicted
    bool low_confidence = false;  // set when no legal class token was emitted
};

// Normalizes `probs` (aligned with `classes`) and fills predicted/confidence.
// Argmax ties break toward the earlier class.
ScoredPrediction make_prediction(const std::vector<ClassLabel>& classes,
                                 std::vector<double> probs);

// Builds a distribution from first-token log-probabilities: each class takes
// the best log-prob among tokens that prefix-match its label, renormalized
// over legal classes. No legal token at all -> uniform + low_confidence.
ScoredPrediction distribution_from_logprobs(
    const std::vector<std::pair<std::string, double>>& token_logprobs,
    const std::vector<ClassLabel>& classes);

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dimension() const { return values.size(); }
    double dot(const EmbeddingVector& o) const;
};

struct LineRange {
    int start_line = 1;  // 1-based inclusive
    int end_line = 1;

    int length() const { return end_line - start_line + 1; }
    bool operator==(const LineRange&) const = default;
};

struct StandardizedDocument;  // restructure.hpp

struct ScoreRequest {
    std::string doc_id;
    double fraction = 1.0;
    std::string text;  // the document slice, placed before the operation
    const OperationPrompt* operation = nullptr;
    // Distinguishes non-standard calls in scripted fixtures (e.g.
    // "reduced:2" for the granularity agreement check at expansion 2).
    std::string variant;
};

struct AgentUsage {
    long input_tokens = 0;
    long output_tokens = 0;
};

class Provider {
  public:
    virtual ~Provider() = default;

    virtual ScoredPrediction score(const ModelRef& model,
                                   const ScoreRequest& request) = 0;
    virtual EmbeddingVector embed(const ModelRef& model,
                                  std::string_view text) = 0;
    virtual std::string generate(const ModelRef& model,
                                 std::string_view prompt) = 0;
    // Minimal line ranges needed to answer `op`, per the oracle.
    virtual std::vector<LineRange> relevant_ranges(const ModelRef& model,
                                                   const StandardizedDocument& doc,
                                                   const OperationPrompt& op) = 0;

    virtual AgentUsage agent_usage() const { return {}; }
};

// ---------------------------------------------------------------------------
// Scripted provider: a pure function of (model, doc id, op id, fraction),
// loaded from a JSON fixture. Used by tests and the simulate command.
//
// Fixture format:
// {
//   "dimension": 8,
//   "score": [{"model": "*", "doc": "d1", "op": "o1", "fraction": "*",
//              "variant": "", "text_contains": "optional substring",
//              "dist": {"True": 0.9, "False": 0.1}}, ...],
//   "ranges": {"d1": [[4, 5], [9, 9]]},
//   "replies": ["agent reply round 1", ...],
//   "embed_keywords": [{"token": "zebra", "coord": 0}]
// }
class ScriptedProvider : public Provider {
  public:
    static ScriptedProvider from_json_text(const std::string& text);
    static ScriptedProvider from_file(const std::string& path);

    ScoredPrediction score(const ModelRef& model, const ScoreRequest& request) override;
    EmbeddingVector embed(const ModelRef& model, std::string_view text) override;
    std::string generate(const ModelRef& model, std::string_view prompt) override;
    std::vector<LineRange> relevant_ranges(const ModelRef& model,
                                           const StandardizedDocument& doc,
                                           const OperationPrompt& op) override;
    AgentUsage agent_usage() const override { return usage_; }

    long score_calls = 0;
    long embed_calls = 0;
    long generate_calls = 0;

  private:
    struct ScoreRule {
        std::string model, doc, op, variant;  // "*" matches anything
        double fraction = -1;                 // -1 matches anything
        std::string text_contains;            // empty = no constraint
        std::vector<std::pair<ClassLabel, double>> dist;
    };
    struct Keyword {
        std::string token;
        std::size_t coord = 0;
    };

    std::vector<ScoreRule> score_rules_;
    std::map<std::string, std::vector<LineRange>> ranges_;
    std::vector<std::string> replies_;
    std::size_t next_reply_ = 0;
    std::vector<Keyword> keywords_;
    std::size_t dimension_ = 8;
    AgentUsage usage_;
};

// Deterministic content-hash embedding used by ScriptedProvider for text
// without planted keywords; exposed for test fixtures.
EmbeddingVector hashed_embedding(std::string_view text, std::size_t dimension,
                                 double scale = 0.05);

// ---------------------------------------------------------------------------
// Response cache: atomic get-or-insert keyed by (model, prompt hash) for
// scores and (model, text) for embeddings. Results are bitwise identical
// with caching on or off; only call counts differ.
class CachingProvider : public Provider {
  public:
    explicit CachingProvider(Provider& inner) : inner_(inner) {}

    ScoredPrediction score(const ModelRef& model, const ScoreRequest& request) override;
    EmbeddingVector embed(const ModelRef& model, std::string_view text) override;
    std::string generate(const ModelRef& model, std::string_view prompt) override;
    std::vector<LineRange> relevant_ranges(const ModelRef& model,
                                           const StandardizedDocument& doc,
                                           const OperationPrompt& op) override;
    AgentUsage agent_usage() const override { return inner_.agent_usage(); }

    long inner_score_calls() const { return inner_score_calls_; }

  private:
    Provider& inner_;
    std::mutex mu_;
    std::map<std::string, ScoredPrediction> score_cache_;
    std::map<std::string, EmbeddingVector> embed_cache_;
    long inner_score_calls_ = 0;
};

// ---------------------------------------------------------------------------
// Remote provider speaking chat-completions-style HTTPS + JSON with the
// `logprobs` option. Endpoint and key come from CASCADES_API_BASE and
// CASCADES_API_KEY. 3 attempts with exponential backoff, then
// "provider unavailable".
class HttpProvider : public Provider {
  public:
    HttpProvider();  // reads environment
    HttpProvider(std::string base_url, std::string api_key);

    ScoredPrediction score(const ModelRef& model, const ScoreRequest& request) override;
    EmbeddingVector embed(const ModelRef& model, std::string_view text) override;
    std::string generate(const ModelRef& model, std::string_view prompt) override;
    std::vector<LineRange> relevant_ranges(const ModelRef& model,
                                           const StandardizedDocument& doc,
                                           const OperationPrompt& op) override;
    AgentUsage agent_usage() const override { return usage_; }

  private:
    std::string post_json(const std::string& path, const std::string& body);

    std::string base_url_;
    std::string api_key_;
    AgentUsage usage_;
};

// Prompt assembly: document before operation, maximizing prefix-cache reuse.
std::string assemble_prompt(std::string_view document_text,
                            const OperationPrompt& op);

// Prompt asking the oracle for minimal relevant line ranges as
// {"ranges":[{"start_line":int,"end_line":int}]}.
std::string line_range_prompt(const StandardizedDocument& doc,
                              const OperationPrompt& op);

// Parses the strict JSON range schema; throws std::runtime_error when
// malformed.
std::vector<LineRange> parse_line_ranges(const std::string& reply);

}  // namespace cascades
