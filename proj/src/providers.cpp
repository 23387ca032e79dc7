#include "cascades/providers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "cascades/restructure.hpp"
#include "json.hpp"

#ifndef CASCADES_NO_HTTP
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"
#endif

namespace cascades {

using nlohmann::json;

ScoredPrediction make_prediction(const std::vector<ClassLabel>& classes,
                                 std::vector<double> probs) {
    if (classes.empty() || classes.size() != probs.size())
        throw std::invalid_argument("classes/probs size mismatch");
    double sum = 0;
    for (double p : probs) {
        if (!(p >= 0)) throw std::invalid_argument("negative probability");
        sum += p;
    }
    ScoredPrediction out;
    if (sum <= 0) {
        // No mass at all: uniform fallback, flagged.
        std::fill(probs.begin(), probs.end(), 1.0 / probs.size());
        out.low_confidence = true;
    } else {
        for (double& p : probs) p /= sum;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[best]) best = i;
    for (std::size_t i = 0; i < classes.size(); ++i)
        out.distribution.emplace_back(classes[i], probs[i]);
    out.predicted = classes[best];
    out.confidence = probs[best];
    return out;
}

namespace {

bool token_matches_class(std::string_view token, std::string_view label) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
            s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
            s.remove_suffix(1);
        return s;
    };
    token = trim(token);
    if (token.empty()) return false;
    if (token.size() > label.size()) return false;
    for (std::size_t i = 0; i < token.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(token[i])) !=
            std::tolower(static_cast<unsigned char>(label[i])))
            return false;
    return true;
}

}  // namespace

ScoredPrediction distribution_from_logprobs(
    const std::vector<std::pair<std::string, double>>& token_logprobs,
    const std::vector<ClassLabel>& classes) {
    std::vector<double> probs(classes.size(), 0.0);
    bool any = false;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& [token, lp] : token_logprobs)
            if (token_matches_class(token, classes[i])) best = std::max(best, lp);
        if (best > -std::numeric_limits<double>::infinity()) {
            probs[i] = std::exp(best);
            any = true;
        }
    }
    if (!any) {
        auto pred = make_prediction(classes, std::vector<double>(classes.size(), 1.0));
        pred.low_confidence = true;
        return pred;
    }
    return make_prediction(classes, std::move(probs));
}

double EmbeddingVector::dot(const EmbeddingVector& o) const {
    if (values.size() != o.values.size())
        throw std::invalid_argument("embedding dimension mismatch");
    double s = 0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[i] * o.values[i];
    return s;
}

EmbeddingVector hashed_embedding(std::string_view text, std::size_t dimension,
                                 double scale) {
    EmbeddingVector e;
    e.values.assign(dimension, 0.0);
    if (text.empty()) return e;  // defined degenerate case: zero vector
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    for (std::size_t i = 0; i < dimension; ++i) {
        h ^= h >> 33;
        h *= 0xff51afd7ed558ccdull;
        h ^= h >> 33;
        // map to [-scale, scale]
        e.values[i] = scale * (2.0 * (static_cast<double>(h >> 11) /
                                      static_cast<double>(1ull << 53)) -
                               1.0);
    }
    return e;
}

// ---------------------------------------------------------------------------
// ScriptedProvider

ScriptedProvider ScriptedProvider::from_json_text(const std::string& text) {
    json j = json::parse(text);
    ScriptedProvider p;
    if (j.contains("dimension")) p.dimension_ = j["dimension"].get<std::size_t>();
    for (const auto& jr : j.value("score", json::array())) {
        ScoreRule r;
        r.model = jr.value("model", "*");
        r.doc = jr.value("doc", "*");
        r.op = jr.value("op", "*");
        r.variant = jr.value("variant", "*");
        if (jr.contains("fraction") && !jr["fraction"].is_string())
            r.fraction = jr["fraction"].get<double>();
        r.text_contains = jr.value("text_contains", "");
        for (auto it = jr.at("dist").begin(); it != jr.at("dist").end(); ++it)
            r.dist.emplace_back(it.key(), it.value().get<double>());
        p.score_rules_.push_back(std::move(r));
    }
    if (j.contains("ranges"))
        for (auto it = j["ranges"].begin(); it != j["ranges"].end(); ++it) {
            std::vector<LineRange> rs;
            for (const auto& pair : it.value())
                rs.push_back({pair.at(0).get<int>(), pair.at(1).get<int>()});
            p.ranges_[it.key()] = std::move(rs);
        }
    for (const auto& r : j.value("replies", json::array()))
        p.replies_.push_back(r.get<std::string>());
    for (const auto& k : j.value("embed_keywords", json::array()))
        p.keywords_.push_back({k.at("token").get<std::string>(),
                               k.value("coord", std::size_t{0})});
    return p;
}

ScriptedProvider ScriptedProvider::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open fixture: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

ScoredPrediction ScriptedProvider::score(const ModelRef& model,
                                         const ScoreRequest& request) {
    ++score_calls;
    if (!request.operation) throw std::invalid_argument("missing operation");
    for (const auto& r : score_rules_) {
        if (r.model != "*" && r.model != model.name) continue;
        if (r.doc != "*" && r.doc != request.doc_id) continue;
        if (r.op != "*" && r.op != request.operation->id) continue;
        if (r.variant != "*" && r.variant != request.variant) continue;
        if (r.fraction >= 0 && std::abs(r.fraction - request.fraction) > 1e-9)
            continue;
        if (!r.text_contains.empty() &&
            request.text.find(r.text_contains) == std::string::npos)
            continue;
        std::vector<ClassLabel> classes;
        std::vector<double> probs;
        for (const auto& [c, pr] : r.dist) {
            classes.push_back(c);
            probs.push_back(pr);
        }
        return make_prediction(classes, std::move(probs));
    }
    throw std::runtime_error("scripted provider: no rule for model=" + model.name +
                             " doc=" + request.doc_id +
                             " op=" + request.operation->id);
}

EmbeddingVector ScriptedProvider::embed(const ModelRef&, std::string_view text) {
    ++embed_calls;
    EmbeddingVector e = hashed_embedding(text, dimension_);
    for (const auto& k : keywords_)
        if (text.find(k.token) != std::string_view::npos &&
            k.coord < e.values.size())
            e.values[k.coord] = 1.0;
    return e;
}

std::string ScriptedProvider::generate(const ModelRef&, std::string_view prompt) {
    ++generate_calls;
    if (next_reply_ >= replies_.size())
        throw std::runtime_error("provider unavailable");
    usage_.input_tokens += default_count_tokens(prompt);
    const std::string& reply = replies_[next_reply_++];
    usage_.output_tokens += default_count_tokens(reply);
    return reply;
}

std::vector<LineRange> ScriptedProvider::relevant_ranges(
    const ModelRef&, const StandardizedDocument& doc, const OperationPrompt&) {
    auto it = ranges_.find(doc.id);
    if (it == ranges_.end())
        throw std::runtime_error("oracle returned malformed ranges for doc " + doc.id);
    return it->second;
}

// ---------------------------------------------------------------------------
// CachingProvider

ScoredPrediction CachingProvider::score(const ModelRef& model,
                                        const ScoreRequest& request) {
    std::string key = model.name + '\x1f' + request.variant + '\x1f' +
                      request.operation->id + '\x1f' +
                      assemble_prompt(request.text, *request.operation);
    {
        std::lock_guard lock(mu_);
        auto it = score_cache_.find(key);
        if (it != score_cache_.end()) return it->second;
    }
    ScoredPrediction pred = inner_.score(model, request);
    std::lock_guard lock(mu_);
    ++inner_score_calls_;
    return score_cache_.emplace(key, std::move(pred)).first->second;
}

EmbeddingVector CachingProvider::embed(const ModelRef& model,
                                       std::string_view text) {
    std::string key = model.name + '\x1f' + std::string(text);
    {
        std::lock_guard lock(mu_);
        auto it = embed_cache_.find(key);
        if (it != embed_cache_.end()) return it->second;
    }
    EmbeddingVector e = inner_.embed(model, text);
    std::lock_guard lock(mu_);
    return embed_cache_.emplace(key, std::move(e)).first->second;
}

std::string CachingProvider::generate(const ModelRef& model,
                                      std::string_view prompt) {
    return inner_.generate(model, prompt);  // agent calls are never cached
}

std::vector<LineRange> CachingProvider::relevant_ranges(
    const ModelRef& model, const StandardizedDocument& doc,
    const OperationPrompt& op) {
    return inner_.relevant_ranges(model, doc, op);
}

// ---------------------------------------------------------------------------
// Prompt assembly and range schema

std::string assemble_prompt(std::string_view document_text,
                            const OperationPrompt& op) {
    std::string prompt;
    prompt.reserve(document_text.size() + op.text.size() + 2);
    prompt.append(document_text);
    prompt.append("\n\n");
    prompt.append(op.text);
    return prompt;
}

std::string line_range_prompt(const StandardizedDocument& doc,
                              const OperationPrompt& op) {
    std::string prompt = doc.numbered_text();
    prompt +=
        "\n\nIdentify the minimal set of non-overlapping line ranges needed "
        "for the operation: ";
    prompt += op.text;
    prompt +=
        "\nRespond with JSON only: "
        "{\"ranges\":[{\"start_line\":int,\"end_line\":int}]}";
    return prompt;
}

std::vector<LineRange> parse_line_ranges(const std::string& reply) {
    json j;
    try {
        j = json::parse(reply);
    } catch (const json::exception&) {
        throw std::runtime_error("malformed line-range reply");
    }
    if (!j.contains("ranges") || !j["ranges"].is_array())
        throw std::runtime_error("malformed line-range reply");
    std::vector<LineRange> out;
    for (const auto& r : j["ranges"]) {
        if (!r.contains("start_line") || !r.contains("end_line"))
            throw std::runtime_error("malformed line-range reply");
        LineRange lr{r["start_line"].get<int>(), r["end_line"].get<int>()};
        if (lr.start_line < 1 || lr.end_line < lr.start_line)
            throw std::runtime_error("malformed line-range reply");
        out.push_back(lr);
    }
    return out;
}

// ---------------------------------------------------------------------------
// HttpProvider

namespace {
constexpr int kMaxAttempts = 3;
}

HttpProvider::HttpProvider() {
    const char* base = std::getenv("CASCADES_API_BASE");
    const char* key = std::getenv("CASCADES_API_KEY");
    base_url_ = base ? base : "";
    api_key_ = key ? key : "";
}

HttpProvider::HttpProvider(std::string base_url, std::string api_key)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)) {}

std::string HttpProvider::post_json(const std::string& path,
                                    const std::string& body) {
#ifdef CASCADES_NO_HTTP
    (void)path;
    (void)body;
    throw std::runtime_error("provider unavailable");
#else
    if (base_url_.empty()) throw std::runtime_error("provider unavailable");
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(200 << attempt));
        httplib::Client client(base_url_);
        client.set_read_timeout(120, 0);
        auto res = client.Post(path, headers, body, "application/json");
        if (res && res->status >= 200 && res->status < 300) return res->body;
        if (res && res->status >= 400 && res->status < 500 && res->status != 429)
            break;  // non-retryable
    }
    throw std::runtime_error("provider unavailable");
#endif
}

ScoredPrediction HttpProvider::score(const ModelRef& model,
                                     const ScoreRequest& request) {
    json body = {
        {"model", model.name},
        {"temperature", 0},
        {"max_tokens", 1},
        {"logprobs", true},
        {"top_logprobs", 20},
        {"messages",
         json::array({{{"role", "user"},
                       {"content", assemble_prompt(request.text, *request.operation)}}})},
    };
    json reply = json::parse(post_json("/v1/chat/completions", body.dump()));
    std::vector<std::pair<std::string, double>> token_logprobs;
    try {
        const json& top = reply.at("choices").at(0).at("logprobs").at("content")
                              .at(0).at("top_logprobs");
        for (const auto& t : top)
            token_logprobs.emplace_back(t.at("token").get<std::string>(),
                                        t.at("logprob").get<double>());
    } catch (const json::exception&) {
        throw std::runtime_error("provider unavailable");
    }
    return distribution_from_logprobs(token_logprobs, request.operation->output_classes);
}

EmbeddingVector HttpProvider::embed(const ModelRef& model, std::string_view text) {
    json body = {{"model", model.name}, {"input", std::string(text)}};
    json reply = json::parse(post_json("/v1/embeddings", body.dump()));
    EmbeddingVector e;
    for (const auto& v : reply.at("data").at(0).at("embedding"))
        e.values.push_back(v.get<double>());
    return e;
}

std::string HttpProvider::generate(const ModelRef& model, std::string_view prompt) {
    json body = {
        {"model", model.name},
        {"temperature", 0},
        {"messages", json::array({{{"role", "user"}, {"content", std::string(prompt)}}})},
    };
    json reply = json::parse(post_json("/v1/chat/completions", body.dump()));
    if (reply.contains("usage")) {
        usage_.input_tokens += reply["usage"].value("prompt_tokens", 0);
        usage_.output_tokens += reply["usage"].value("completion_tokens", 0);
    }
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
}

std::vector<LineRange> HttpProvider::relevant_ranges(const ModelRef& model,
                                                     const StandardizedDocument& doc,
                                                     const OperationPrompt& op) {
    return parse_line_ranges(generate(model, line_range_prompt(doc, op)));
}

}  // namespace cascades
