// Command-line operator surface: optimize, run, simulate, report.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "cascades/pipeline.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace cascades;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitProvider = 3;
constexpr int kExitNotFound = 4;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Atomic publish: write to a temp sibling, then rename over the target.
void write_file_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

std::unique_ptr<Provider> make_provider(const std::string& fixtures_path) {
    if (!fixtures_path.empty())
        return std::make_unique<ScriptedProvider>(
            ScriptedProvider::from_file(fixtures_path));
    return std::make_unique<HttpProvider>();
}

struct CommonArgs {
    std::string out_dir = ".";
    std::string fixtures;
};

int cmd_optimize(const std::string& corpus_path, const std::string& task_path,
                 const std::string& config_path, const CommonArgs& common,
                 const std::optional<double>& alpha,
                 const std::optional<double>& delta,
                 const std::optional<std::uint64_t>& seed, bool guarantee,
                 bool lite) {
    RunConfig cfg = run_config_from_json_text(read_file(config_path));
    if (alpha) cfg.alpha = *alpha;
    if (delta) cfg.delta = *delta;
    if (seed) cfg.seed = *seed;
    if (guarantee) cfg.guarantee = true;
    if (lite) cfg.lite = true;
    cfg.validate();
    TaskSpec task = TaskSpec::from_json_text(read_file(task_path));
    std::vector<Document> corpus = load_corpus_jsonl(corpus_path);
    auto provider = make_provider(common.fixtures);

    OptimizeResult result = optimize(corpus, task, cfg, *provider);
    fs::create_directories(common.out_dir);
    write_file_atomic(fs::path(common.out_dir) / "artifact.json",
                      result.artifact.to_json_text());
    write_file_atomic(fs::path(common.out_dir) / "report.json",
                      result.dev_report.to_json_text());
    if (result.artifact.guarantee_requested && !result.artifact.guarantee_found) {
        std::cerr << "guarantee not found; artifact falls back to the oracle-only "
                     "cascade\n";
        return kExitNotFound;
    }
    return kExitOk;
}

int cmd_run(const std::string& artifact_path, const std::string& corpus_path,
            const CommonArgs& common) {
    CascadeArtifact artifact =
        CascadeArtifact::from_json_text(read_file(artifact_path));
    std::vector<Document> corpus = load_corpus_jsonl(corpus_path);
    auto provider = make_provider(common.fixtures);
    CachingProvider cache(*provider);

    WorldIndex world;
    for (const auto& m : artifact.config.models) world.add(m);
    for (const auto& op : artifact.operations) world.add(op);
    TokenCounter counter = token_counter_by_id(artifact.config.token_counter);

    std::vector<PreparedDocument> docs;
    for (const auto& d : corpus) {
        if (artifact.relevance) {
            const ModelRef* embedder =
                artifact.config.find_role(ModelRole::embedder);
            if (!embedder)
                throw std::invalid_argument(
                    "artifact carries a relevance model but the config has no "
                    "embedder");
            StandardizedDocument std_doc =
                standardize(d, artifact.config.line_width);
            docs.push_back(
                reorder(std_doc, *artifact.relevance, cache, *embedder).prepared());
        } else {
            docs.push_back(PreparedDocument::from_raw(d));
        }
    }

    ProviderScorer scorer(cache, world, counter);
    std::ostringstream trace;
    Money total;
    std::map<int, long> coverage;
    for (const auto& doc : docs) {
        DocResult r = run_cascade(artifact.cascade, doc, scorer, world, counter,
                                  artifact.config.include_output_cost);
        if (r.failed) throw ProviderError("provider unavailable for doc " + doc.id);
        trace << doc_result_to_json(r) << "\n";
        total += r.total_cost;
        ++coverage[r.exit_stage];
    }
    nlohmann::json summary;
    summary["n_docs"] = docs.size();
    summary["total_cost_pico"] = total.pico;
    summary["total_cost_usd"] = total.usd();
    nlohmann::json stages;
    for (const auto& [stage, n] : coverage) stages[std::to_string(stage)] = n;
    summary["stage_coverage"] = stages;

    fs::create_directories(common.out_dir);
    write_file_atomic(fs::path(common.out_dir) / "trace.jsonl", trace.str());
    write_file_atomic(fs::path(common.out_dir) / "report.json",
                      summary.dump(2) + "\n");
    return kExitOk;
}

int cmd_simulate(const std::string& scenario_path, const CommonArgs& common) {
    Scenario scenario = Scenario::from_json_text(read_file(scenario_path));
    std::vector<SweepRow> rows = simulate_sweep(scenario);
    fs::create_directories(common.out_dir);
    write_file_atomic(fs::path(common.out_dir) / "sweep.csv", sweep_to_csv(rows));
    return kExitOk;
}

int cmd_report(const std::string& artifact_path) {
    CascadeArtifact a = CascadeArtifact::from_json_text(read_file(artifact_path));
    std::cout << "cascade stages: " << a.cascade.tasks.size() << " + oracle\n";
    for (std::size_t i = 0; i < a.cascade.tasks.size(); ++i)
        std::cout << "  stage " << i + 1 << ": " << a.cascade.tasks[i].config.key()
                  << "\n";
    std::cout << "  stage " << a.cascade.oracle_stage() << ": oracle "
              << a.cascade.oracle.model << "\n";
    std::cout << "operations: " << a.operations.size() << " ("
              << a.operations.size() - 1 << " surrogates)\n";
    std::cout << "dev accuracy: " << a.dev_accuracy << "\n";
    std::cout << "dev cost: $" << a.dev_cost.usd() << "\n";
    std::cout << "optimization cost: $" << a.opt_cost.c_opt.usd() << "\n";
    if (a.guarantee_requested)
        std::cout << "guarantee: "
                  << (a.guarantee_found ? "certified (shift " +
                                              std::to_string(a.shift) + ")"
                                        : "NOT FOUND (oracle-only fallback)")
                  << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"task cascade optimizer"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string corpus_path, task_path, config_path, artifact_path, scenario_path;
    std::optional<double> alpha, delta;
    std::optional<std::uint64_t> seed;
    bool guarantee = false, lite = false;

    auto* opt = app.add_subcommand("optimize", "construct a cascade");
    opt->add_option("--corpus", corpus_path, "corpus JSONL")->required();
    opt->add_option("--task", task_path, "task spec JSON")->required();
    opt->add_option("--config", config_path, "run config JSON")->required();
    opt->add_option("--alpha", alpha, "target accuracy override");
    opt->add_option("--delta", delta, "failure probability override");
    opt->add_option("--seed", seed, "seed override");
    opt->add_flag("--guarantee", guarantee, "certify thresholds");
    opt->add_flag("--lite", lite, "proxy-only candidate evaluation");
    opt->add_option("--fixtures", common.fixtures, "scripted provider fixture");
    opt->add_option("--out", common.out_dir, "output directory");

    auto* run = app.add_subcommand("run", "execute an artifact on a corpus");
    run->add_option("--artifact", artifact_path, "cascade artifact")->required();
    run->add_option("--corpus", corpus_path, "corpus JSONL")->required();
    run->add_option("--fixtures", common.fixtures, "scripted provider fixture");
    run->add_option("--out", common.out_dir, "output directory");

    auto* sim = app.add_subcommand("simulate", "alpha sweep over a scenario");
    sim->add_option("--scenario", scenario_path, "scenario JSON")->required();
    sim->add_option("--out", common.out_dir, "output directory");

    auto* rep = app.add_subcommand("report", "summarize an artifact");
    rep->add_option("--artifact", artifact_path, "cascade artifact")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (opt->parsed())
            return cmd_optimize(corpus_path, task_path, config_path, common, alpha,
                                delta, seed, guarantee, lite);
        if (run->parsed()) return cmd_run(artifact_path, corpus_path, common);
        if (sim->parsed()) return cmd_simulate(scenario_path, common);
        if (rep->parsed()) return cmd_report(artifact_path);
    } catch (const ProviderError& e) {
        std::cerr << "provider failure: " << e.what() << "\n";
        return kExitProvider;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        if (msg.find("provider unavailable") != std::string::npos) {
            std::cerr << "provider failure: " << msg << "\n";
            return kExitProvider;
        }
        std::cerr << "config error: " << msg << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
