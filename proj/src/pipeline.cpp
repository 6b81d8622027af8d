#include "stratopt/pipeline.h"

#include "stratopt/allocation_io.h"
#include "stratopt/estimators.h"
#include "stratopt/mc.h"
#include "stratopt/population_io.h"
#include "stratopt/text_io.h"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <optional>

namespace stratopt {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view stage_name(Stage stage) noexcept {
    switch (stage) {
    case Stage::synth:
        return "synth";
    case Stage::baseline:
        return "baseline";
    case Stage::allocate:
        return "allocate";
    case Stage::reduce:
        return "reduce";
    case Stage::mc:
        return "mc";
    case Stage::report:
        return "report";
    }
    return "report";
}

Stage stage_from_name(std::string_view name) {
    for (const auto s : kStages) {
        if (stage_name(s) == name) {
            return s;
        }
    }
    throw std::invalid_argument("unknown stage \"" + std::string{name} + "\"");
}

StageError::StageError(Stage stage, const std::string &message)
    : std::runtime_error("stage " + std::string{stage_name(stage)} + " failed: " + message), stage_{stage} {}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

std::string sha256_file(const fs::path &path) { return sha256_hex(read_text_file(path)); }

json to_json(const RunManifest &m) {
    json j;
    j["tool_version"] = m.tool_version;
    j["config_hash"] = m.config_hash;
    j["seed"] = m.seed;
    j["timings"] = json::array();
    for (const auto &t : m.timings) {
        j["timings"].push_back({{"stage", t.stage}, {"seconds", t.seconds}});
    }
    j["files"] = json::array();
    for (const auto &f : m.files) {
        j["files"].push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    }
    j["failed_stage"] = m.failed_stage;
    j["error"] = m.error;
    return j;
}

RunManifest manifest_from_json(const json &j) {
    try {
        RunManifest m;
        m.tool_version = j.at("tool_version").get<std::string>();
        m.config_hash = j.at("config_hash").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        for (const auto &t : j.at("timings")) {
            m.timings.push_back({t.at("stage").get<std::string>(), t.at("seconds").get<double>()});
        }
        for (const auto &f : j.at("files")) {
            m.files.push_back(
                {f.at("path").get<std::string>(), f.at("sha256").get<std::string>(), f.at("bytes").get<std::uintmax_t>()});
        }
        m.failed_stage = j.value("failed_stage", "");
        m.error = j.value("error", "");
        return m;
    } catch (const json::exception &e) {
        throw std::runtime_error(std::string{"corrupt manifest: "} + e.what());
    }
}

RunManifest read_manifest(const fs::path &run_dir) {
    const auto path = run_dir / files::manifest;
    if (!fs::exists(path)) {
        throw std::runtime_error("no manifest in " + run_dir.string() + " (not a run directory)");
    }
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception &e) {
        throw std::runtime_error("corrupt manifest " + path.string() + ": " + e.what());
    }
    return manifest_from_json(j);
}

namespace {

/// Stage inputs loaded on demand and shared between stages of one run.
class Context {
  public:
    explicit Context(const RunConfig &config) : config_{config}, dir_{config.output} {}

    [[nodiscard]] const RunConfig &config() const { return config_; }
    [[nodiscard]] fs::path path(const char *name) const { return dir_ / name; }

    fs::path require(const char *name, Stage producer) const {
        const auto p = path(name);
        if (!fs::exists(p)) {
            throw std::invalid_argument("missing artifact " + p.string() + " (produced by stage " +
                                        std::string{stage_name(producer)} + ")");
        }
        return p;
    }

    const Synthesis &synthesis() {
        if (!synthesis_) {
            synthesis_ = read_population(require(files::population_csv, Stage::synth),
                                         require(files::population_json, Stage::synth));
        }
        return *synthesis_;
    }
    void set_synthesis(Synthesis s) { synthesis_ = std::move(s); }

    const Sample &baseline_sample() {
        if (!baseline_) {
            baseline_ = read_sample_manifest(require(files::baseline_sample, Stage::baseline).string(),
                                             synthesis().population.strata_count());
        }
        return *baseline_;
    }
    void set_baseline(Sample s) { baseline_ = std::move(s); }

    Allocation allocation(const std::string &name) {
        const auto all = read_allocations_csv(require(files::allocations, Stage::allocate));
        for (const auto &a : all) {
            if (a.name == name) {
                auto out = a.allocation;
                out.provenance.kind = name == "bethel" ? AllocationKind::bethel : AllocationKind::custom;
                return out;
            }
        }
        throw std::invalid_argument("allocation \"" + name + "\" not found in " + path(files::allocations).string());
    }

  private:
    const RunConfig &config_;
    fs::path dir_;
    std::optional<Synthesis> synthesis_;
    std::optional<Sample> baseline_;
};

void stage_synth(Context &ctx) {
    auto s = synthesize(ctx.config().population);
    write_population(s, ctx.path(files::population_csv), ctx.path(files::population_json));
    ctx.set_synthesis(std::move(s));
}

void stage_baseline(Context &ctx) {
    const auto &pop = ctx.synthesis().population;
    const auto alloc = baseline_allocation(pop, ctx.config().baseline_fraction);
    auto sample = draw_stratified(pop, alloc, RandomStream::derive(ctx.config().seed, "baseline"), "baseline");
    write_text_file(ctx.path(files::baseline_sample), sample_manifest_csv(sample));
    write_text_file(ctx.path(files::baseline_summary), baseline_summary_csv(summarize_baseline(sample, pop)));
    ctx.set_baseline(std::move(sample));
}

json cv_rows(const Allocation &alloc, const VarianceInputs &in, std::optional<int> only) {
    json rows = json::array();
    for (int k = 0; k < in.variables; ++k) {
        if (only && *only != k) {
            continue;
        }
        double worst = 0.0;
        int worst_area = 0;
        for (int d = 1; d <= in.domains; ++d) {
            const double cv = cv_of(alloc, in, d, k);
            if (cv > worst) {
                worst = cv;
                worst_area = d;
            }
        }
        rows.push_back({{"variable", in.variable_names[static_cast<std::size_t>(k)]},
                        {"national_cv", cv_of(alloc, in, 0, k)},
                        {"worst_domain_cv", worst},
                        {"worst_domain", worst_area}});
    }
    return rows;
}

void stage_allocate(Context &ctx) {
    const auto &cfg = ctx.config();
    const auto summary = read_baseline_summary_csv(ctx.require(files::baseline_summary, Stage::baseline).string());
    const auto targets = cfg.targets();
    AllocationProblem problem{build_variance_inputs(summary, kAllVariables, targets, cfg.variance), targets};
    save_problem(problem, ctx.path(files::problem));
    const auto &in = problem.inputs;

    std::vector<NamedAllocation> named;
    std::vector<Allocation> neyman;
    json j;
    j["warnings"] = in.warnings;
    j["cv"]["neyman"] = json::array();
    for (int k = 0; k < in.variables; ++k) {
        auto a = neyman_allocation(in, k, targets(0, k));
        const auto &name = in.variable_names[static_cast<std::size_t>(k)];
        j["totals"]["neyman"][name] = a.total();
        j["cv"]["neyman"].push_back(cv_rows(a, in, k).front());
        named.push_back({"neyman_" + name, a});
        neyman.push_back(std::move(a));
    }
    const auto nso = nso_max_allocation(neyman);
    named.push_back({"nso_max", nso});
    j["totals"]["nso_max"] = nso.total();
    j["cv"]["nso_max"] = cv_rows(nso, in, std::nullopt);

    const auto bethel = bethel_solve(in, targets, cfg.bethel);
    named.push_back({"bethel", bethel.rounded});
    j["totals"]["bethel"] = bethel.rounded.total();
    j["cv"]["bethel"] = cv_rows(bethel.rounded, in, std::nullopt);
    j["bethel"] = to_json(bethel, in);
    j["bethel"]["feasible"] = satisfies_all(bethel.rounded, in, targets);
    j["targets"] = {{"national", cfg.national_target}, {"domain", cfg.domain_target}};

    write_text_file(ctx.path(files::allocations), allocations_csv(named));
    write_text_file(ctx.path(files::allocation_json), j.dump(2) + "\n");
}

TruthProxy make_proxy(Context &ctx) {
    const auto &s = ctx.synthesis();
    if (ctx.config().truth_proxy == "baseline") {
        return TruthProxy::from_direct(direct_estimates(ctx.baseline_sample(), s.population, kAllVariables),
                                       s.population.domain_count());
    }
    return TruthProxy::from_truth(s.truth);
}

void stage_reduce(Context &ctx) {
    const auto &cfg = ctx.config();
    const auto &pop = ctx.synthesis().population;
    const auto bethel = ctx.allocation("bethel");
    bethel.validate(stratum_sizes(pop));
    const auto master = draw_stratified(pop, bethel, RandomStream::derive(cfg.seed, "master"), "master");
    write_text_file(ctx.path(files::master_sample), sample_manifest_csv(master));
    auto settings = cfg.reduction;
    settings.thresholds.targets = cfg.targets();
    const auto result = run_reduction(master, ctx.baseline_sample(), pop, make_proxy(ctx), settings);

    std::vector<GateReport> reports;
    std::vector<PriorGridResult> grids;
    for (const auto &r : result.variables) {
        reports.insert(reports.end(), r.initial.reports.begin(), r.initial.reports.end());
        grids.push_back(r.priors);
    }
    for (const auto &r : result.variables) {
        reports.insert(reports.end(), r.final.reports.begin(), r.final.reports.end());
    }
    write_text_file(ctx.path(files::gate_reports), gate_reports_csv(reports));
    write_text_file(ctx.path(files::prior_grid), prior_grid_csv(grids));
    write_text_file(ctx.path(files::reduction_json), reduction_json(result) + "\n");
}

void stage_mc(Context &ctx) {
    const auto &cfg = ctx.config();
    const auto &s = ctx.synthesis();
    const auto red = json::parse(read_text_file(ctx.require(files::reduction_json, Stage::reduce)));
    MCConfig mc;
    mc.replications = cfg.mc_replications;
    mc.master = ctx.allocation("bethel");
    mc.alpha = red.at("alpha_star").get<double>();
    mc.variables.clear();
    for (const auto &v : red.at("variables")) {
        const auto var = variable_from_name(v.at("variable").get<std::string>());
        mc.variables.push_back(var);
        mc.priors[static_cast<std::size_t>(index_of(var))] = {v.at("prior").at("nu").get<double>(),
                                                              v.at("prior").at("s2").get<double>()};
    }
    mc.model = cfg.reduction.model;
    mc.targets = cfg.targets();
    mc.rhat_limit = cfg.reduction.thresholds.rhat_limit;
    mc.base_seed = RandomStream::derive(cfg.seed, "mc").key();
    mc.parallelism = cfg.mc_parallelism;
    const auto records = run_mc(mc, s.population, TruthProxy::from_truth(s.truth));
    write_text_file(ctx.path(files::mc_raw), mc_raw_csv(records));
    write_text_file(ctx.path(files::mc_summary), mc_summary_csv(aggregate(records, s.population.domain_count())));
}

void run_one(Context &ctx, Stage stage) {
    switch (stage) {
    case Stage::synth:
        stage_synth(ctx);
        break;
    case Stage::baseline:
        stage_baseline(ctx);
        break;
    case Stage::allocate:
        stage_allocate(ctx);
        break;
    case Stage::reduce:
        stage_reduce(ctx);
        break;
    case Stage::mc:
        stage_mc(ctx);
        break;
    case Stage::report:
        write_report(ctx.config().output, ctx.config().checks);
        break;
    }
}

std::vector<FileRecord> inventory(const fs::path &dir) {
    std::vector<FileRecord> out;
    for (const auto &entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        const auto rel = fs::relative(entry.path(), dir).generic_string();
        if (rel == files::manifest) {
            continue;
        }
        out.push_back({rel, sha256_file(entry.path()), entry.file_size()});
    }
    std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) { return a.path < b.path; });
    return out;
}

RunManifest execute(const RunConfig &config, std::span<const Stage> stages) {
    config.validate();
    fs::create_directories(config.output);
    const auto config_text = to_json(config).dump(2) + "\n";
    RunManifest manifest;
    if (fs::exists(config.output / files::manifest)) {
        try {
            manifest = read_manifest(config.output);
        } catch (const std::exception &) {
            manifest = RunManifest{};
        }
    }
    manifest.tool_version = std::string{kToolVersion};
    manifest.config_hash = sha256_hex(config_text);
    manifest.seed = config.seed;
    manifest.failed_stage.clear();
    manifest.error.clear();
    write_text_file(config.output / files::config, config_text);

    auto save = [&] {
        manifest.files = inventory(config.output);
        write_text_file(config.output / files::manifest, to_json(manifest).dump(2) + "\n");
    };
    Context ctx{config};
    for (const auto stage : stages) {
        const auto start = std::chrono::steady_clock::now();
        try {
            if (stage == Stage::report) {
                save();
            }
            run_one(ctx, stage);
        } catch (const std::exception &e) {
            manifest.failed_stage = std::string{stage_name(stage)};
            manifest.error = e.what();
            save();
            throw StageError(stage, e.what());
        }
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        const auto name = std::string{stage_name(stage)};
        auto it = std::find_if(manifest.timings.begin(), manifest.timings.end(),
                               [&](const auto &t) { return t.stage == name; });
        if (it == manifest.timings.end()) {
            manifest.timings.push_back({name, elapsed.count()});
        } else {
            it->seconds = elapsed.count();
        }
    }
    save();
    return manifest;
}

} // namespace

RunManifest run_pipeline(const RunConfig &config, Stage first, Stage last) {
    std::vector<Stage> stages;
    for (const auto s : kStages) {
        if (static_cast<int>(s) >= static_cast<int>(first) && static_cast<int>(s) <= static_cast<int>(last)) {
            stages.push_back(s);
        }
    }
    return execute(config, stages);
}

RunManifest run_stage(const RunConfig &config, Stage stage) {
    const std::array<Stage, 1> one{stage};
    return execute(config, one);
}

} // namespace stratopt
