#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cascades/money.hpp"

namespace cascades {

using ClassLabel = std::string;

// Sentinel surrogate output meaning "none of the above"; never a member of
// a ClassSet.
inline constexpr const char* kAbstainLabel = "-1";

inline constexpr double kInfThreshold = std::numeric_limits<double>::infinity();

struct Document {
    std::string id;
    std::string text;
    std::optional<ClassLabel> gold_label;  // oracle label cache
};

struct ClassSet {
    std::vector<ClassLabel> labels;  // ordered, distinct, non-empty
    bool allows_abstain = false;

    int index_of(std::string_view label) const {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == label) return static_cast<int>(i);
        return -1;
    }
    bool contains(std::string_view label) const { return index_of(label) >= 0; }
};

struct OperationPrompt {
    std::string id;
    std::string text;
    std::vector<ClassLabel> output_classes;  // subset of ClassSet labels
    bool allows_abstain = false;
    int origin_round = -1;  // -1 = original, >=0 = surrogate round index

    bool is_original() const { return origin_round < 0; }
};

struct TaskConfig {
    std::string model;  // ModelRef name
    std::string op;     // OperationPrompt id
    double fraction = 1.0;

    // Stable identity used as a table key and for deterministic ordering.
    std::string key() const;

    bool operator==(const TaskConfig&) const = default;
};

struct Task {
    TaskConfig config;
    // ClassLabel -> threshold in [0,1], or +inf meaning "never exit on
    // this class". Covers exactly the operation's output classes.
    std::map<ClassLabel, double> thresholds;
};

struct Cascade {
    std::vector<Task> tasks;
    TaskConfig oracle;  // fraction 1.0, original operation; no thresholds

    std::size_t oracle_stage() const { return tasks.size() + 1; }  // 1-based
};

// ---------------------------------------------------------------------------
// Token counting

// Pluggable counter; the default is ceil(chars/4) so all cost math is
// deterministic and offline. Counters are referenced by id inside the
// cascade artifact.
using TokenCounter = std::function<long(std::string_view)>;

long default_count_tokens(std::string_view text);  // ceil(len/4)
long whitespace_word_count(std::string_view text);

// Known counter ids: "chars4", "words". Throws on unknown id.
TokenCounter token_counter_by_id(const std::string& id);

// ---------------------------------------------------------------------------
// Documents prepared for cascade execution: an ordered list of lines
// (restructured, or raw text split on newlines).

struct PreparedDocument {
    std::string id;
    std::vector<std::string> lines;
    std::optional<ClassLabel> gold_label;

    std::string full_text() const;

    static PreparedDocument from_raw(const Document& doc);
};

// Smallest line-aligned prefix whose token count reaches ceil(f * total
// tokens). f = 1.0 returns the whole document. Prefix-monotone in f.
std::string take_fraction(const PreparedDocument& doc, double fraction,
                          const TokenCounter& counter);

// ---------------------------------------------------------------------------
// Run configuration

struct ModelPrices {
    Money in_new;     // per new input token
    Money in_cached;  // per cached input token
    Money out;        // per output token
};

enum class ModelRole { proxy, oracle, agent, embedder };

std::string to_string(ModelRole role);
ModelRole model_role_from_string(const std::string& s);

struct ModelRef {
    std::string name;
    ModelRole role = ModelRole::proxy;
    ModelPrices prices;
};

struct RunConfig {
    double alpha = 0.9;
    double delta = 0.25;
    std::vector<double> fractions = {0.1, 0.25, 0.5, 1.0};
    int n_s = 5;          // surrogates per round
    int n_a = 3;          // max agent rounds
    double g = 0.10;      // minimum coverage fraction
    int s_max = 5;        // max shift index
    int e_max = 3;        // max range expansions
    int line_width = 80;  // characters per standardized line
    std::uint64_t seed = 0;
    int dev_size = 200;
    bool lite = false;
    bool guarantee = false;
    bool include_output_cost = false;
    std::string token_counter = "chars4";
    std::vector<ModelRef> models;

    void validate() const;  // throws std::invalid_argument on violations
    const ModelRef& model(std::string_view name) const;
    const ModelRef* find_role(ModelRole role) const;  // first match or null
};

// JSON (de)serialization; round-trips losslessly.
RunConfig run_config_from_json_text(const std::string& text);
std::string run_config_to_json_text(const RunConfig& cfg);

// Line-delimited JSON corpus: {"id": str, "text": str, "label": optional str}
std::vector<Document> load_corpus_jsonl(const std::string& path);

// Seed substream derivation: every stage draws from seed ^ fnv1a(name) so
// runs are independently replayable per stage.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream_name);

}  // namespace cascades
