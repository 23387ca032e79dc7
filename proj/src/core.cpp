#include "cascades/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cascades {

using nlohmann::json;

std::string TaskConfig::key() const {
    std::ostringstream os;
    os << model << '|' << op << '|';
    // Stable textual fraction; fractions come from a small configured set.
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", fraction);
    os << buf;
    return os.str();
}

long default_count_tokens(std::string_view text) {
    return static_cast<long>((text.size() + 3) / 4);
}

long whitespace_word_count(std::string_view text) {
    long words = 0;
    bool in_word = false;
    for (unsigned char ch : text) {
        bool space = std::isspace(ch) != 0;
        if (!space && !in_word) ++words;
        in_word = !space;
    }
    return words;
}

TokenCounter token_counter_by_id(const std::string& id) {
    if (id == "chars4") return default_count_tokens;
    if (id == "words") return whitespace_word_count;
    throw std::invalid_argument("unknown token counter: " + id);
}

std::string PreparedDocument::full_text() const {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += '\n';
        out += lines[i];
    }
    return out;
}

PreparedDocument PreparedDocument::from_raw(const Document& doc) {
    PreparedDocument p;
    p.id = doc.id;
    p.gold_label = doc.gold_label;
    std::string line;
    std::istringstream is(doc.text);
    while (std::getline(is, line)) p.lines.push_back(line);
    if (p.lines.empty() && !doc.text.empty()) p.lines.push_back(doc.text);
    return p;
}

std::string take_fraction(const PreparedDocument& doc, double fraction,
                          const TokenCounter& counter) {
    if (fraction <= 0.0 || fraction > 1.0)
        throw std::invalid_argument("fraction must be in (0, 1]");
    std::string full = doc.full_text();
    if (full.empty()) throw std::invalid_argument("empty input");
    if (fraction == 1.0) return full;

    long total = counter(full);
    long target = static_cast<long>(std::ceil(fraction * static_cast<double>(total)));
    std::string prefix;
    for (std::size_t i = 0; i < doc.lines.size(); ++i) {
        if (i) prefix += '\n';
        prefix += doc.lines[i];
        if (counter(prefix) >= target) return prefix;
    }
    return full;
}

std::string to_string(ModelRole role) {
    switch (role) {
        case ModelRole::proxy: return "proxy";
        case ModelRole::oracle: return "oracle";
        case ModelRole::agent: return "agent";
        case ModelRole::embedder: return "embedder";
    }
    throw std::logic_error("bad role");
}

ModelRole model_role_from_string(const std::string& s) {
    if (s == "proxy") return ModelRole::proxy;
    if (s == "oracle") return ModelRole::oracle;
    if (s == "agent") return ModelRole::agent;
    if (s == "embedder") return ModelRole::embedder;
    throw std::invalid_argument("unknown model role: " + s);
}

void RunConfig::validate() const {
    auto in01 = [](double v) { return v > 0.0 && v < 1.0; };
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("alpha must be in (0,1]");
    if (!in01(delta)) throw std::invalid_argument("delta must be in (0,1)");
    if (!in01(g)) throw std::invalid_argument("g must be in (0,1)");
    if (std::find(fractions.begin(), fractions.end(), 1.0) == fractions.end())
        throw std::invalid_argument("fractions must include 1.0");
    for (double f : fractions)
        if (!(f > 0.0 && f <= 1.0))
            throw std::invalid_argument("fractions must lie in (0,1]");
    if (s_max < 1) throw std::invalid_argument("s_max must be >= 1");
    if (line_width < 20) throw std::invalid_argument("line_width must be >= 20");
    for (const auto& m : models) {
        if (m.prices.in_new.pico < 0 || m.prices.in_cached.pico < 0 ||
            m.prices.out.pico < 0)
            throw std::invalid_argument("model prices must be >= 0");
        if (m.prices.in_cached > m.prices.in_new)
            throw std::invalid_argument("price_in_cached must be <= price_in_new");
    }
}

const ModelRef& RunConfig::model(std::string_view name) const {
    for (const auto& m : models)
        if (m.name == name) return m;
    throw std::invalid_argument("unknown model: " + std::string(name));
}

const ModelRef* RunConfig::find_role(ModelRole role) const {
    for (const auto& m : models)
        if (m.role == role) return &m;
    return nullptr;
}

namespace {

json model_to_json(const ModelRef& m) {
    return json{{"name", m.name},
                {"role", to_string(m.role)},
                {"price_in_new_pico", m.prices.in_new.pico},
                {"price_in_cached_pico", m.prices.in_cached.pico},
                {"price_out_pico", m.prices.out.pico}};
}

ModelRef model_from_json(const json& j) {
    ModelRef m;
    m.name = j.at("name").get<std::string>();
    m.role = model_role_from_string(j.at("role").get<std::string>());
    auto price = [&](const char* pico_key, const char* usd_key) {
        if (j.contains(pico_key)) return Money{j.at(pico_key).get<std::int64_t>()};
        if (j.contains(usd_key)) return Money::from_usd(j.at(usd_key).get<double>());
        return Money{};
    };
    m.prices.in_new = price("price_in_new_pico", "price_in_new");
    m.prices.in_cached = price("price_in_cached_pico", "price_in_cached");
    m.prices.out = price("price_out_pico", "price_out");
    return m;
}

}  // namespace

RunConfig run_config_from_json_text(const std::string& text) {
    json j = json::parse(text);
    RunConfig c;
    if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
    if (j.contains("delta")) c.delta = j["delta"].get<double>();
    if (j.contains("fractions")) c.fractions = j["fractions"].get<std::vector<double>>();
    if (j.contains("n_s")) c.n_s = j["n_s"].get<int>();
    if (j.contains("n_a")) c.n_a = j["n_a"].get<int>();
    if (j.contains("g")) c.g = j["g"].get<double>();
    if (j.contains("s_max")) c.s_max = j["s_max"].get<int>();
    if (j.contains("e_max")) c.e_max = j["e_max"].get<int>();
    if (j.contains("line_width")) c.line_width = j["line_width"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("dev_size")) c.dev_size = j["dev_size"].get<int>();
    if (j.contains("lite")) c.lite = j["lite"].get<bool>();
    if (j.contains("guarantee")) c.guarantee = j["guarantee"].get<bool>();
    if (j.contains("include_output_cost"))
        c.include_output_cost = j["include_output_cost"].get<bool>();
    if (j.contains("token_counter"))
        c.token_counter = j["token_counter"].get<std::string>();
    if (j.contains("models"))
        for (const auto& jm : j["models"]) c.models.push_back(model_from_json(jm));
    c.validate();
    return c;
}

std::string run_config_to_json_text(const RunConfig& c) {
    json j;
    j["alpha"] = c.alpha;
    j["delta"] = c.delta;
    j["fractions"] = c.fractions;
    j["n_s"] = c.n_s;
    j["n_a"] = c.n_a;
    j["g"] = c.g;
    j["s_max"] = c.s_max;
    j["e_max"] = c.e_max;
    j["line_width"] = c.line_width;
    j["seed"] = c.seed;
    j["dev_size"] = c.dev_size;
    j["lite"] = c.lite;
    j["guarantee"] = c.guarantee;
    j["include_output_cost"] = c.include_output_cost;
    j["token_counter"] = c.token_counter;
    json models = json::array();
    for (const auto& m : c.models) models.push_back(model_to_json(m));
    j["models"] = models;
    return j.dump(2);
}

std::vector<Document> load_corpus_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus: " + path);
    std::vector<Document> docs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line);
        Document d;
        d.id = j.at("id").get<std::string>();
        d.text = j.at("text").get<std::string>();
        if (j.contains("label") && !j["label"].is_null())
            d.gold_label = j["label"].get<std::string>();
        for (const auto& prev : docs)
            if (prev.id == d.id)
                throw std::runtime_error("duplicate document id at line " +
                                         std::to_string(lineno) + ": " + d.id);
        docs.push_back(std::move(d));
    }
    return docs;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view stream_name) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char ch : stream_name) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return base ^ h;
}

}  // namespace cascades
