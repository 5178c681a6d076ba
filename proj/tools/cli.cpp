// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include "a1o/checkpoint.hpp"
#include "a1o/errors.hpp"
#include "a1o/evaluation.hpp"
#include "a1o/gradcheck.hpp"
#include "a1o/pipeline.hpp"
#include "a1o/synthdata.hpp"
#include "a1o/trainer.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>

namespace a1o::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err)
{
    auto log = std::make_shared<spdlog::logger>("a1o", std::make_shared<spdlog::sinks::ostream_sink_st>(err));
    log->set_pattern("[%l] %v");
    log->set_level(spdlog::level::info);
    if (const char* env = std::getenv("A1O_LOG")) {
        const std::string name(env);
        static const std::set<std::string> known{"trace", "debug", "info", "warning", "warn", "error", "critical", "off"};
        if (known.contains(name))
            log->set_level(spdlog::level::from_str(name == "warn" ? "warning" : name));
        else
            log->warn("ignoring unknown A1O_LOG level '{}'", name);
    }
    return log;
}

DomainOptions domain_options(const fs::path& file)
{
    DomainOptions o;
    if (file.empty()) return o;
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read " + file.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    static const std::set<std::string> keys{"negative_fraction", "identities", "identity_offset", "canvas", "patch", "min_face",
                                            "max_face", "max_yaw", "max_pitch", "max_roll", "noise"};
    for (const auto& [k, v] : j.items())
        if (!keys.contains(k)) throw ConfigError("synth config: unknown field '" + k + "'");
    o.negative_fraction = j.value("negative_fraction", o.negative_fraction);
    o.identities = j.value("identities", o.identities);
    o.identity_offset = j.value("identity_offset", o.identity_offset);
    o.canvas = j.value("canvas", o.canvas);
    o.patch = j.value("patch", o.patch);
    o.min_face = j.value("min_face", o.min_face);
    o.max_face = j.value("max_face", o.max_face);
    o.max_yaw = j.value("max_yaw", o.max_yaw);
    o.max_pitch = j.value("max_pitch", o.max_pitch);
    o.max_roll = j.value("max_roll", o.max_roll);
    o.noise = j.value("noise", o.noise);
    return o;
}

std::vector<SamplePool> read_pools(const std::vector<std::string>& dirs)
{
    std::vector<SamplePool> pools;
    for (const auto& d : dirs) pools.push_back(read_pool(d));
    return pools;
}

// The model spec stored next to a checkpoint, else the desk default.
Model load_model(const fs::path& checkpoint, const fs::path& spec_file)
{
    fs::path spec = spec_file;
    if (spec.empty() && fs::exists(checkpoint.parent_path() / "model.json")) spec = checkpoint.parent_path() / "model.json";
    Model m = Model::build(spec.empty() ? ModelSpec::desk_default() : ModelSpec::load(spec), 1);
    m.load_parameters(load_checkpoint(checkpoint));
    return m;
}

void write_json(const fs::path& file, const json& j)
{
    std::ofstream f(file);
    if (!f) throw ConfigError("cannot write " + file.string());
    f << j.dump(2) << '\n';
}

struct SynthArgs {
    std::string role;
    std::string name;
    std::size_t n = 0;
    std::uint64_t seed = 1;
    std::string config;
    std::string out;
};

int cmd_synth(const SynthArgs& a, spdlog::logger& log)
{
    const TaskSet role = parse_role(a.role);
    const auto pool = make_domain(a.name.empty() ? a.role : a.name, role, a.n, a.seed, domain_options(a.config));
    write_pool(a.out, pool);
    log.info("wrote {} samples to {}", pool.samples.size(), a.out);
    return kOk;
}

struct TrainArgs {
    std::string config;
    std::vector<std::string> data;
    std::string model;
    std::string out;
    std::string resume;
    std::string warm_start;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

int cmd_train(const TrainArgs& a, spdlog::logger& log)
{
    TrainConfig cfg = TrainConfig::load(a.config);
    if (a.seed) cfg.seed = *a.seed;
    if (a.threads) cfg.threads = *a.threads;
    cfg.validate();
    const ModelSpec spec = a.model.empty() ? ModelSpec::desk_default() : ModelSpec::load(a.model);
    const auto pools = read_pools(a.data);

    Model model = Model::build(spec, cfg.seed);
    if (!a.warm_start.empty()) model.load_parameters(load_checkpoint(a.warm_start));
    Trainer trainer(model, cfg);
    if (!a.resume.empty()) {
        trainer.resume(a.resume);
        log.info("resumed at iteration {}", trainer.iteration());
    }
    fs::create_directories(a.out);
    write_json(fs::path(a.out) / "model.json", spec.to_json());
    write_json(fs::path(a.out) / "config.json", cfg.to_json());
    log.info("training {} parameters for {} steps on {} pools", model.params().parameter_count(), cfg.steps, pools.size());
    trainer.run(pools, a.out, [&](std::uint64_t it, const BatchLoss& loss) {
        if (cfg.log_every > 0 && (it % cfg.log_every == 0 || it + 1 == cfg.steps))
            log.info("iteration {} total {:.6g}", it, loss.total);
    });
    return kOk;
}

struct EvalArgs {
    std::string checkpoint;
    std::string model;
    std::vector<std::string> data;
    std::string protocol;
    std::string config;
    std::string out;
    int threads = 1;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, spdlog::logger& log)
{
    EvalOptions opt;
    if (!a.config.empty()) opt.pipeline = PipelineConfig::load(a.config);
    opt.threads = a.threads;
    opt.pipeline.threads = a.threads;
    const Model model = load_model(a.checkpoint, a.model);
    const auto pools = read_pools(a.data);
    const MetricReport report = evaluate(model, pools, a.protocol, opt);
    if (!a.out.empty()) {
        fs::create_directories(a.out);
        write_json(fs::path(a.out) / "report.json", report.to_json());
        report.write_curves(a.out);
        log.info("wrote report to {}", a.out);
    } else {
        out << report.to_json().dump(2) << '\n';
    }
    return kOk;
}

struct InferArgs {
    std::string checkpoint;
    std::string model;
    std::string image;
    std::string config;
    std::string out;
    std::string overlay;
    int threads = 1;
};

void write_overlay(std::ostream& csv, const std::vector<FaceRecord>& faces)
{
    csv << std::setprecision(17) << "face,kind,index,x,y,visible\n";
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Box& b = faces[f].box;
        const double corners[4][2] = {{b.x, b.y}, {b.x + b.w, b.y}, {b.x + b.w, b.y + b.h}, {b.x, b.y + b.h}};
        for (int c = 0; c < 4; ++c) csv << f << ",box," << c << ',' << corners[c][0] << ',' << corners[c][1] << ",1\n";
        for (std::size_t k = 0; 2 * k + 1 < faces[f].landmarks.size(); ++k)
            csv << f << ",landmark," << k << ',' << faces[f].landmarks[2 * k] << ',' << faces[f].landmarks[2 * k + 1] << ','
                << (faces[f].visibility[k] >= 0.5 ? 1 : 0) << '\n';
    }
}

int cmd_infer(const InferArgs& a, std::ostream& out, spdlog::logger& log)
{
    PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : PipelineConfig::load(a.config);
    cfg.threads = a.threads;
    const Model model = load_model(a.checkpoint, a.model);
    const auto faces = detect_and_analyze(model, read_pnm(a.image), cfg);
    log.info("{} faces in {}", faces.size(), a.image);

    std::ofstream file;
    if (!a.out.empty()) {
        file.open(a.out);
        if (!file) throw ConfigError("cannot write " + a.out);
    }
    std::ostream& lines = a.out.empty() ? out : file;
    for (const auto& f : faces) lines << f.to_json().dump() << '\n';
    if (!a.overlay.empty()) {
        std::ofstream csv(a.overlay);
        if (!csv) throw ConfigError("cannot write " + a.overlay);
        write_overlay(csv, faces);
    }
    return kOk;
}

struct GradcheckArgs {
    std::vector<std::string> scope;
    int instances = 20;
    std::uint64_t seed = 1;
    std::string fault;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out)
{
    std::optional<OpKind> fault;
    if (!a.fault.empty()) {
        fault = op_from_name(a.fault);
        if (!fault) throw ConfigError("unknown op '" + a.fault + "'");
    }
    set_gradient_fault(fault);
    std::vector<SuiteRow> rows;
    try {
        rows = run_gradient_suite(a.scope, a.instances, a.seed);
    } catch (...) {
        set_gradient_fault(std::nullopt);
        throw;
    }
    set_gradient_fault(std::nullopt);

    bool all = true;
    out << std::left << std::setw(24) << "name" << std::setw(11) << "instances" << std::setw(16) << "max_rel_error" << "result\n";
    for (const auto& r : rows) {
        out << std::setw(24) << r.name << std::setw(11) << r.instances << std::setw(16) << std::setprecision(3)
            << std::scientific << r.max_relative_error << std::defaultfloat << (r.passed ? "pass" : "FAIL") << '\n';
        all = all && r.passed;
    }
    return all ? kOk : kFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    const auto log = make_logger(err);
    CLI::App app{"Multi-task face analysis: synthetic data, training, evaluation and inference", "a1o"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic sample pool");
    s->add_option("--role", synth.role, "Preset (aflw, casia, morph, imdb_wiki, adience, celeba) or task list")->required();
    s->add_option("--n", synth.n, "Number of samples")->required()->check(CLI::PositiveNumber);
    s->add_option("--seed", synth.seed, "Generator seed");
    s->add_option("--name", synth.name, "Pool name (defaults to the role)");
    s->add_option("--config", synth.config, "JSON generator options")->check(CLI::ExistingFile);
    s->add_option("--out", synth.out, "Output directory")->required();

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train a model on one or more pools");
    t->add_option("--config", train.config, "Training config JSON")->required()->check(CLI::ExistingFile);
    t->add_option("--data", train.data, "Pool directories")->required()->check(CLI::ExistingDirectory);
    t->add_option("--model", train.model, "Model spec JSON (desk default when omitted)")->check(CLI::ExistingFile);
    t->add_option("--out", train.out, "Output directory for checkpoints and loss.csv")->required();
    t->add_option("--resume", train.resume, "Continue from a trainer checkpoint")->check(CLI::ExistingFile);
    t->add_option("--warm-start", train.warm_start, "Initialize parameters from a checkpoint")->check(CLI::ExistingFile);
    t->add_option("--seed", train.seed, "Override the config seed");
    t->add_option("--threads", train.threads, "Override the config thread count")->check(CLI::PositiveNumber);

    EvalArgs eval;
    auto* e = app.add_subcommand("eval", "Evaluate a checkpoint under one protocol");
    e->add_option("--checkpoint", eval.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
    e->add_option("--model", eval.model, "Model spec JSON (model.json next to the checkpoint by default)")->check(CLI::ExistingFile);
    e->add_option("--data", eval.data, "Pool directories")->required()->check(CLI::ExistingDirectory);
    e->add_option("--protocol", eval.protocol, "Protocol name")->required()->check(CLI::IsMember(protocol_names()));
    e->add_option("--config", eval.config, "Pipeline config JSON")->check(CLI::ExistingFile);
    e->add_option("--out", eval.out, "Directory for report.json and curve CSVs (stdout when omitted)");
    e->add_option("--threads", eval.threads, "Worker threads")->check(CLI::PositiveNumber);

    InferArgs infer;
    auto* i = app.add_subcommand("infer", "Detect and analyze faces in an image");
    i->add_option("--checkpoint", infer.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
    i->add_option("--model", infer.model, "Model spec JSON (model.json next to the checkpoint by default)")->check(CLI::ExistingFile);
    i->add_option("--image", infer.image, "PGM or PPM image")->required()->check(CLI::ExistingFile);
    i->add_option("--config", infer.config, "Pipeline config JSON")->check(CLI::ExistingFile);
    i->add_option("--out", infer.out, "JSON-lines output file (stdout when omitted)");
    i->add_option("--overlay", infer.overlay, "CSV of box corners and landmarks");
    i->add_option("--threads", infer.threads, "Worker threads")->check(CLI::PositiveNumber);

    GradcheckArgs grad;
    auto* g = app.add_subcommand("gradcheck", "Finite-difference check of every op and loss");
    g->add_option("--scope", grad.scope, "Entries to check (all when omitted)")->delimiter(',')->check(CLI::IsMember(suite_names()));
    g->add_option("--instances", grad.instances, "Random instances per entry")->check(CLI::PositiveNumber);
    g->add_option("--seed", grad.seed, "Instance seed");
    g->add_option("--inject-fault", grad.fault, "Corrupt one op's backward rule (test hook)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*s) return cmd_synth(synth, *log);
        if (*t) return cmd_train(train, *log);
        if (*e) return cmd_eval(eval, out, *log);
        if (*i) return cmd_infer(infer, out, *log);
        return cmd_gradcheck(grad, out);
    } catch (const ConfigError& ex) {
        log->error("{}", ex.what());
        return kUsage;
    } catch (const std::exception& ex) {
        log->error("{}", ex.what());
        return kFailure;
    }
}

}  // namespace a1o::cli
