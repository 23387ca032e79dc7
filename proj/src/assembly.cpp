#include "cascades/assembly.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "json.hpp"

namespace cascades {

namespace {

struct TrialResult {
    bool feasible = false;
    Money cost;
};

// Executes the cascade from the score table and checks the per-task
// accuracy constraint on each task's classified subset (vacuous when a
// task classifies nothing).
TrialResult try_cascade(const Cascade& cascade, const AssemblyInputs& in) {
    TableScorer scorer(*in.table);
    std::size_t k = cascade.tasks.size();
    std::vector<long> classified(k, 0), correct(k, 0);
    TrialResult out;
    for (const auto& doc : *in.docs) {
        DocResult r = run_cascade(cascade, doc, scorer, *in.world, in.counter,
                                  in.include_output_cost);
        out.cost += r.total_cost;
        if (r.exit_stage >= 1 && static_cast<std::size_t>(r.exit_stage) <= k) {
            std::size_t i = static_cast<std::size_t>(r.exit_stage) - 1;
            ++classified[i];
            if (r.prediction == in.gold->at(doc.id)) ++correct[i];
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        if (classified[i] > 0 &&
            static_cast<double>(correct[i]) <
                in.alpha * static_cast<double>(classified[i]))
            return out;  // infeasible
    }
    out.feasible = true;
    return out;
}

}  // namespace

AssembledCascade greedy_assemble(std::span<const Task> candidates,
                                 const TaskConfig& oracle_config,
                                 const AssemblyInputs& in) {
    Cascade current;
    current.oracle = oracle_config;
    Money current_cost = try_cascade(current, in).cost;  // oracle-only baseline
    std::vector<bool> used(candidates.size(), false);

    while (true) {
        int best_idx = -1;
        Money best_cost = current_cost;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (used[i]) continue;
            Cascade trial = current;
            trial.tasks.push_back(candidates[i]);
            TrialResult r = try_cascade(trial, in);
            if (r.feasible && r.cost < best_cost) {  // strict: ties keep earlier
                best_cost = r.cost;
                best_idx = static_cast<int>(i);
            }
        }
        if (best_idx < 0) break;
        current.tasks.push_back(candidates[best_idx]);
        used[best_idx] = true;
        current_cost = best_cost;
    }
    return {std::move(current), current_cost};
}

AssembledCascade exhaustive_assemble(std::span<const Task> candidates,
                                     const TaskConfig& oracle_config,
                                     const AssemblyInputs& in, int max_tasks) {
    if (max_tasks > 7 || static_cast<int>(candidates.size()) > max_tasks)
        throw std::invalid_argument("exhaustive_assemble: candidate count above guard");

    Cascade best;
    best.oracle = oracle_config;
    Money best_cost = try_cascade(best, in).cost;

    const std::size_t n = candidates.size();
    for (std::size_t mask = 1; mask < (1u << n); ++mask) {
        std::vector<int> idx;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) idx.push_back(static_cast<int>(i));
        std::sort(idx.begin(), idx.end());
        do {
            Cascade trial;
            trial.oracle = oracle_config;
            for (int i : idx) trial.tasks.push_back(candidates[i]);
            TrialResult r = try_cascade(trial, in);
            if (r.feasible && r.cost < best_cost) {
                best_cost = r.cost;
                best = trial;
            }
        } while (std::next_permutation(idx.begin(), idx.end()));
    }
    return {std::move(best), best_cost};
}

// ---------------------------------------------------------------------------
// MSSC reduction

MsscInstance MsscInstance::from_json_text(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    MsscInstance inst;
    for (const auto& u : j.at("universe")) inst.universe.push_back(u.get<std::string>());
    for (const auto& s : j.at("sets")) {
        std::vector<std::string> set;
        for (const auto& item : s) set.push_back(item.get<std::string>());
        inst.sets.push_back(std::move(set));
    }
    return inst;
}

AssemblyInputs ReducedMssc::inputs(double alpha) const {
    AssemblyInputs in;
    in.docs = &docs;
    in.gold = &gold;
    in.table = &table;
    in.world = &world;
    in.counter = counter;
    in.alpha = alpha;
    return in;
}

ReducedMssc reduce_mssc(const MsscInstance& instance) {
    ReducedMssc r;
    // Word counting prices documents (a single space) at zero tokens, so
    // only the unit-cost operation token is ever billed for a set task.
    r.counter = whitespace_word_count;

    ModelRef proxy;
    proxy.name = "proxy";
    proxy.role = ModelRole::proxy;
    proxy.prices = {Money{1}, Money{0}, Money{0}};  // 1 pico per token
    ModelRef oracle;
    oracle.name = "oracle";
    oracle.role = ModelRole::oracle;
    oracle.prices = {Money{1'000'000'000}, Money{0}, Money{0}};
    r.world.add(proxy);
    r.world.add(oracle);

    OperationPrompt orig;
    orig.id = "orig";
    orig.text = "op";  // one word = one token
    orig.output_classes = {"True", "False"};
    r.world.add(orig);
    r.oracle_config = {"oracle", "orig", 1.0};

    for (const auto& item : instance.universe) {
        PreparedDocument doc;
        doc.id = item;
        doc.lines = {" "};  // non-empty text, zero word tokens
        doc.gold_label = "True";
        r.docs.push_back(doc);
        r.gold[item] = "True";
        r.table.set_gold(item, "True");
        r.table.put(r.oracle_config, item,
                    make_prediction({"True", "False"}, {1.0, 0.0}));
    }

    for (std::size_t i = 0; i < instance.sets.size(); ++i) {
        OperationPrompt op;
        op.id = "set" + std::to_string(i);
        op.text = "op";
        op.output_classes = {"True", "False"};
        r.world.add(op);

        Task task;
        task.config = {"proxy", op.id, 1.0};
        task.thresholds = {{"True", 1.0}, {"False", kInfThreshold}};

        const auto& members = instance.sets[i];
        for (const auto& item : instance.universe) {
            bool covered =
                std::find(members.begin(), members.end(), item) != members.end();
            r.table.put(task.config, item,
                        covered ? make_prediction({"True", "False"}, {1.0, 0.0})
                                : make_prediction({"True", "False"}, {0.5, 0.5}));
        }
        r.candidates.push_back(std::move(task));
    }
    return r;
}

long mssc_brute_force(const MsscInstance& instance) {
    const std::size_t n = instance.sets.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    long best = std::numeric_limits<long>::max();
    do {
        long cost = 0;
        bool feasible = true;
        for (const auto& item : instance.universe) {
            long pos = 0;
            for (std::size_t j = 0; j < n && pos == 0; ++j) {
                const auto& set = instance.sets[order[j]];
                if (std::find(set.begin(), set.end(), item) != set.end())
                    pos = static_cast<long>(j) + 1;
            }
            if (pos == 0) {
                feasible = false;
                break;
            }
            cost += pos;
        }
        if (feasible) best = std::min(best, cost);
    } while (std::next_permutation(order.begin(), order.end()));
    if (best == std::numeric_limits<long>::max())
        throw std::invalid_argument("mssc instance infeasible: uncovered item");
    return best;
}

}  // namespace cascades
