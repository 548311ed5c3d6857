#include "mstream/cli.hpp"

#include <glob.h>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "mstream/config.hpp"
#include "mstream/errors.hpp"
#include "mstream/latency.hpp"
#include "mstream/metrics.hpp"
#include "mstream/motion_io.hpp"
#include "mstream/pipeline.hpp"
#include "mstream/server.hpp"
#include "mstream/synth.hpp"

namespace mstream {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct CommonOpts {
    std::string config;
    std::vector<std::string> sets;
    std::string seed;
    std::string format = "table";
};

// "section.key=value"; the value is read as JSON, or as a bare string.
void apply_set(json& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &root;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("--set: empty key in '" + path + "'");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            break;
        }
        node = &(*node)[key];
        if (!node->is_null() && !node->is_object()) throw ConfigError("--set: '" + key + "' is not a section");
        start = dot + 1;
    }
}

AppConfig resolve_config(const CommonOpts& o) {
    json root = json::object();
    std::filesystem::path base_dir;
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) throw ConfigError("cannot open config file '" + o.config + "'");
        try {
            root = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError("config file '" + o.config + "' is not valid JSON: " + e.what());
        }
        base_dir = std::filesystem::path(o.config).parent_path();
    }
    AppConfig base;
    base.base_dir = base_dir;
    AppConfig cfg = app_config_from_json(root, std::move(base));
    // Precedence: file < environment < --set < --seed.
    apply_env_overrides(cfg);
    json sets = json::object();
    for (const auto& s : o.sets) apply_set(sets, s);
    cfg = app_config_from_json(sets, std::move(cfg));
    if (!o.seed.empty()) {
        const std::uint64_t seed = parse_seed(o.seed);
        cfg.backend.toy.seed = seed;
        cfg.pipeline.seed = seed;
    }
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& o, bool with_format = true) {
    cmd->add_option("--config", o.config, "JSON config file (backend, pipeline, styles, listen)");
    cmd->add_option("--set", o.sets, "Override one config value: section.key=value (repeatable)");
    cmd->add_option("--seed", o.seed, "Seed for the backend and the denoiser noise");
    if (with_format) {
        cmd->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"table", "structured"}));
    }
}

std::vector<double> parse_vec(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("--style-vec: cannot parse '" + item + "'");
        }
    }
    return v;
}

std::string fmt(double v, int precision = 6) {
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

double ms(double us) { return us / 1000.0; }

// ---- stylize --------------------------------------------------------------

struct StylizeOpts {
    std::string input;
    std::string style_file;
    std::string style_vec;
    std::string style_name;
    std::string mode;
    std::string out;
    std::string features_out;
};

int cmd_stylize(const CommonOpts& c, const StylizeOpts& o, std::ostream& out) {
    AppConfig cfg = resolve_config(c);
    if (!o.mode.empty()) cfg.pipeline.mode = parse_mode(o.mode);
    const auto backend = make_backend(cfg.backend);
    const MotionFile input = read_motion_file(o.input);
    const auto& desc = backend->descriptor();
    if (input.motion.width() != desc.frame_width) {
        throw DataError(o.input + ": frame width " + std::to_string(input.motion.width()) + " but backend expects " +
                        std::to_string(desc.frame_width));
    }
    StyleCatalog catalog = build_catalog(cfg.styles, cfg.default_style, *backend, cfg.base_dir);
    StyleEmbedding style = catalog.default_embedding();
    const int style_sources = int(!o.style_file.empty()) + int(!o.style_vec.empty()) + int(!o.style_name.empty());
    if (style_sources > 1) throw ConfigError("give at most one of --style, --style-vec, --style-name");
    if (!o.style_file.empty()) {
        style = backend->style_embed(read_motion_file(o.style_file).motion);
        style.label = o.style_file;
    } else if (!o.style_vec.empty()) {
        style = StyleEmbedding{parse_vec(o.style_vec), "custom"};
        try {
            backend->check_style(style);
        } catch (const Error& e) {
            throw ConfigError(std::string("--style-vec: ") + e.what());
        }
    } else if (!o.style_name.empty()) {
        const StyleEmbedding* s = catalog.find(o.style_name);
        if (!s) throw ConfigError("unknown style '" + o.style_name + "'");
        style = *s;
    }
    if (cfg.pipeline.mode == PipelineMode::offline) {
        cfg.pipeline.validate();
    } else {
        cfg.pipeline.validate_for(desc);
    }
    if (cfg.pipeline.mode != PipelineMode::offline && input.motion.size() < cfg.pipeline.window) {
        throw DataError(o.input + ": " + std::to_string(input.motion.size()) +
                        " frames is shorter than the window length " + std::to_string(cfg.pipeline.window) +
                        "; nothing would be emitted");
    }

    const StreamResult r = run_stream(input.motion, backend, cfg.pipeline, style);
    const std::size_t skip = cfg.pipeline.mode == PipelineMode::offline ? 0 : r.steady_state_begin;
    write_joints_file(o.out, r.joints, skip);
    if (!o.features_out.empty()) write_motion_file(o.features_out, r.features, desc.joint_count);

    LatencyStats lat;
    for (const auto& t : r.stride_times) lat.add(ms(t.total()));
    std::optional<double> jitter;
    if (r.joints.size() >= skip + 3) {
        const JointSequence steady = r.joints.slice(skip, r.joints.size());
        jitter = total_jitter(std::span<const JointSequence>(&steady, 1)).jitter;
    }
    if (c.format == "structured") {
        ordered_json j{{"command", "stylize"},
                       {"mode", std::string(to_string(cfg.pipeline.mode))},
                       {"frames_in", input.motion.size()},
                       {"frames_out", r.joints.size()},
                       {"strides", r.strides},
                       {"warmup_frames", skip},
                       {"jitter", jitter ? json(*jitter) : json(nullptr)},
                       {"latency_ms", {{"mean", lat.mean()}, {"p50", lat.percentile(50)}, {"p95", lat.percentile(95)},
                                       {"max", lat.max()}}}};
        out << j.dump() << '\n';
    } else {
        out << "mode          " << to_string(cfg.pipeline.mode) << '\n'
            << "frames in     " << input.motion.size() << '\n'
            << "frames out    " << r.joints.size() << '\n'
            << "strides       " << r.strides << '\n'
            << "warm-up       " << skip << " frames excluded from jitter\n"
            << "jitter        " << (jitter ? fmt(*jitter, 9) : std::string("undefined")) << '\n'
            << "stride ms     mean " << fmt(lat.mean(), 4) << "  p50 " << fmt(lat.percentile(50), 4) << "  p95 "
            << fmt(lat.percentile(95), 4) << "  max " << fmt(lat.max(), 4) << '\n'
            << "wrote         " << o.out << '\n';
    }
    return kExitOk;
}

// ---- bench ----------------------------------------------------------------

int cmd_bench(const CommonOpts& c, std::size_t frames, int steps, std::ostream& out) {
    AppConfig cfg = resolve_config(c);
    if (steps > 0) cfg.pipeline.steps = steps;
    if (cfg.pipeline.mode == PipelineMode::offline) throw ConfigError("bench streams; offline mode is not supported");
    const auto backend = make_backend(cfg.backend);
    cfg.pipeline.validate_for(backend->descriptor());
    if (frames < cfg.pipeline.window) {
        throw ConfigError("--frames must be >= window length (" + std::to_string(cfg.pipeline.window) + "), got " +
                          std::to_string(frames));
    }
    const MotionSequence input = synth_motion(frames, backend->descriptor().frame_width, cfg.pipeline.seed);
    StyleCatalog catalog = build_catalog(cfg.styles, cfg.default_style, *backend, cfg.base_dir);
    StreamingPipeline pipe(cfg.pipeline, backend, catalog.default_embedding());
    StageTimes sum;
    LatencyStats lat;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < input.size(); ++i) {
        const std::size_t before = pipe.strides();
        pipe.push_frame(input.frame(i));
        if (pipe.strides() != before) {
            const StageTimes& t = pipe.last_stage_times();
            sum.encode += t.encode;
            sum.denoise += t.denoise;
            sum.decode += t.decode;
            sum.reencode += t.reencode;
            sum.causal_decode += t.causal_decode;
            sum.bookkeeping += t.bookkeeping;
            lat.add(ms(t.total()));
        }
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const std::size_t n = pipe.strides();
    const double per = n ? 1.0 / static_cast<double>(n) : 0.0;
    const double strides_per_sec = wall > 0 ? static_cast<double>(n) / wall : 0.0;
    const double fps = strides_per_sec * static_cast<double>(cfg.pipeline.stride);
    if (c.format == "structured") {
        ordered_json j{{"command", "bench"},
                       {"backend", backend->descriptor().name},
                       {"frames", frames},
                       {"steps", cfg.pipeline.steps},
                       {"strides", n},
                       {"strides_per_sec", strides_per_sec},
                       {"frames_per_sec", fps},
                       {"wall_s", wall},
                       {"stage_ms", {{"encode", ms(sum.encode) * per},
                                     {"denoise", ms(sum.denoise) * per},
                                     {"decode", ms(sum.decode) * per},
                                     {"reencode", ms(sum.reencode) * per},
                                     {"causal_decode", ms(sum.causal_decode) * per},
                                     {"bookkeeping", ms(sum.bookkeeping) * per}}},
                       {"stride_ms", {{"mean", lat.mean()}, {"p50", lat.percentile(50)}, {"p95", lat.percentile(95)},
                                      {"max", lat.max()}}}};
        out << j.dump() << '\n';
    } else {
        out << "backend        " << backend->descriptor().name << "  steps " << cfg.pipeline.steps << '\n'
            << "strides        " << n << " over " << frames << " frames\n"
            << "strides/sec    " << fmt(strides_per_sec, 6) << "  (" << fmt(fps, 6) << " output frames/sec)\n"
            << "stage ms/stride\n"
            << "  encode         " << fmt(ms(sum.encode) * per, 4) << '\n'
            << "  denoise        " << fmt(ms(sum.denoise) * per, 4) << '\n'
            << "  decode         " << fmt(ms(sum.decode) * per, 4) << '\n'
            << "  reencode       " << fmt(ms(sum.reencode) * per, 4) << '\n'
            << "  causal decode  " << fmt(ms(sum.causal_decode) * per, 4) << '\n'
            << "  bookkeeping    " << fmt(ms(sum.bookkeeping) * per, 4) << '\n'
            << "stride ms      p50 " << fmt(lat.percentile(50), 4) << "  p95 " << fmt(lat.percentile(95), 4)
            << "  max " << fmt(lat.max(), 4) << '\n';
    }
    return kExitOk;
}

// ---- jitter ---------------------------------------------------------------

std::vector<std::string> expand(const std::vector<std::string>& patterns) {
    std::vector<std::string> files;
    for (const auto& p : patterns) {
        if (p.find_first_of("*?[") == std::string::npos) {
            files.push_back(p);
            continue;
        }
        glob_t g{};
        const int rc = ::glob(p.c_str(), 0, nullptr, &g);
        if (rc == 0) {
            for (std::size_t i = 0; i < g.gl_pathc; ++i) files.emplace_back(g.gl_pathv[i]);
        }
        globfree(&g);
        if (rc == GLOB_NOMATCH) throw DataError("no files match '" + p + "'");
        if (rc != 0 && rc != GLOB_NOMATCH) throw DataError("cannot expand '" + p + "'");
    }
    return files;
}

int cmd_jitter(const std::vector<std::string>& patterns, bool include_warmup, const std::string& format,
               std::ostream& out) {
    const auto files = expand(patterns);
    if (files.empty()) throw DataError("no input files");
    std::vector<JitterTerms> terms;
    ordered_json per_file = ordered_json::array();
    for (const auto& f : files) {
        const JointsFile jf = read_joints_file(f);
        const std::size_t skip = include_warmup ? 0 : jf.warmup_frames;
        const JointSequence seq = jf.joints.slice(skip, jf.joints.size());
        terms.push_back(sequence_jitter_terms(seq));
        per_file.push_back(ordered_json{{"file", f}, {"D", terms.back().d_sum}, {"N", terms.back().n_count},
                                        {"skipped", skip}});
    }
    const JitterReport r = total_jitter(std::span<const JitterTerms>(terms));
    if (format == "structured") {
        out << ordered_json{{"command", "jitter"}, {"D", r.d_sum}, {"N", r.n_count}, {"jitter", r.jitter},
                            {"files", per_file}}
                   .dump()
            << '\n';
    } else {
        for (std::size_t i = 0; i < files.size(); ++i) {
            out << "file " << files[i] << "  D " << fmt(terms[i].d_sum, 12) << "  N " << terms[i].n_count << '\n';
        }
        out << "D       " << fmt(r.d_sum, 12) << '\n'
            << "N       " << r.n_count << '\n'
            << "jitter  " << fmt(r.jitter, 12) << '\n';
    }
    return kExitOk;
}

// ---- serve ----------------------------------------------------------------

int cmd_serve(const CommonOpts& c, const std::string& listen, const std::string& ui, std::ostream& out,
              std::atomic<bool>* stop) {
    AppConfig cfg = resolve_config(c);
    if (!listen.empty()) cfg.listen = listen;
    // Fail fast on a config that no session could open.
    {
        SessionConfig probe;
        probe.backend = cfg.backend;
        probe.pipeline = cfg.pipeline;
        probe.styles = cfg.styles;
        probe.style = cfg.default_style;
        probe.base_dir = cfg.base_dir;
        Session check("probe", probe);
    }
    auto [host, port] = parse_listen(cfg.listen);
    if (!ui.empty() && !std::filesystem::is_directory(ui)) throw ConfigError("--ui: '" + ui + "' is not a directory");
    Service service(cfg);
    Server server(service, ServerOptions{host, port, ui});
    server.bind();
    out << "listening on " << host << ":" << server.port() << (ui.empty() ? "" : "  ui " + ui) << std::endl;
    std::atomic<bool> local{false};
    std::atomic<bool>& flag = stop ? *stop : local;
    server.run(flag, [&](const SessionSummary& s) {
        out << "session " << s.session << " closed: frames_in " << s.frames_in << " frames_out " << s.frames_out
            << " strides " << s.strides << " mean_latency_ms " << fmt(s.mean_latency_ms, 4) << " jitter "
            << (s.jitter ? fmt(*s.jitter, 9) : std::string("undefined")) << std::endl;
    });
    out << "stopped" << std::endl;
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err, std::atomic<bool>* stop) {
    CLI::App app{"Streaming motion stylization engine"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    CommonOpts sty_c;
    StylizeOpts sty;
    auto* stylize = app.add_subcommand("stylize", "Stylize a motion file and write joints");
    add_common(stylize, sty_c);
    stylize->add_option("--input", sty.input, "Input motion file")->required();
    stylize->add_option("--style", sty.style_file, "Style motion file");
    stylize->add_option("--style-vec", sty.style_vec, "Style embedding as comma-separated numbers");
    stylize->add_option("--style-name", sty.style_name, "Style from the config catalog");
    stylize->add_option("--mode", sty.mode, "proposed | naive | offline | no_reencode | noncausal")
        ->check(CLI::IsMember({"proposed", "naive", "offline", "no_reencode", "noncausal"}));
    stylize->add_option("--out", sty.out, "Output joints file")->required();
    stylize->add_option("--features-out", sty.features_out, "Also write the emitted feature stream");

    CommonOpts bench_c;
    std::size_t bench_frames = 600;
    int bench_steps = 0;
    auto* bench = app.add_subcommand("bench", "Measure strides/sec and per-stage timings");
    add_common(bench, bench_c);
    bench->add_option("--frames", bench_frames, "Synthetic input length");
    bench->add_option("--steps", bench_steps, "Denoising steps (overrides config)")->check(CLI::PositiveNumber);

    std::vector<std::string> jit_inputs;
    std::string jit_format = "table";
    bool jit_include_warmup = false;
    auto* jitter = app.add_subcommand("jitter", "Pooled total jitter over joints files");
    jitter->add_option("--inputs", jit_inputs, "Joints files or glob patterns")->required();
    jitter->add_option("--format", jit_format, "Report format")->check(CLI::IsMember({"table", "structured"}));
    jitter->add_flag("--include-warmup", jit_include_warmup, "Do not skip the header's warm-up frames");

    CommonOpts serve_c;
    std::string listen;
    std::string ui;
    auto* serve = app.add_subcommand("serve", "Run the streaming service");
    add_common(serve, serve_c, false);
    serve->add_option("--listen", listen, "host:port (overrides config and MSTREAM_LISTEN)");
    serve->add_option("--ui", ui, "Directory of static viewer files to host");

    std::size_t syn_frames = 200;
    std::size_t syn_width = 263;
    std::uint64_t syn_seed = 0;
    double syn_fps = kDefaultFps;
    std::string syn_out;
    auto* synth = app.add_subcommand("synth", "Write a seeded synthetic motion file");
    synth->add_option("--frames", syn_frames, "Frame count");
    synth->add_option("--width", syn_width, "Feature width d");
    synth->add_option("--seed", syn_seed, "Seed");
    synth->add_option("--fps", syn_fps, "Frames per second")->check(CLI::PositiveNumber);
    synth->add_option("--out", syn_out, "Output motion file")->required();

    CommonOpts exp_c;
    std::string exp_out;
    auto* export_toy = app.add_subcommand("export-toy", "Write the configured linear backend's weights");
    add_common(export_toy, exp_c, false);
    export_toy->add_option("--out", exp_out, "Output weights file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (*stylize) return cmd_stylize(sty_c, sty, out);
        if (*bench) return cmd_bench(bench_c, bench_frames, bench_steps, out);
        if (*jitter) return cmd_jitter(jit_inputs, jit_include_warmup, jit_format, out);
        if (*serve) return cmd_serve(serve_c, listen, ui, out, stop);
        if (*synth) {
            write_motion_file(syn_out, synth_motion(syn_frames, syn_width, syn_seed, syn_fps));
            out << "wrote " << syn_frames << " frames to " << syn_out << '\n';
            return kExitOk;
        }
        if (*export_toy) {
            AppConfig cfg = resolve_config(exp_c);
            if (cfg.backend.name == "toy") {
                save_linear_weights(generate_toy_params(cfg.backend.toy), exp_out);
            } else if (cfg.backend.name == "toy-identity") {
                const auto& t = cfg.backend.toy;
                save_linear_weights(identity_params(t.frame_width, t.joint_count, t.max_window, t.style_dim, t.seed),
                                    exp_out);
            } else {
                throw ConfigError("export-toy needs backend toy or toy-identity");
            }
            out << "wrote " << exp_out << '\n';
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const DimensionError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const MetricError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const ArgumentError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const BackendError& e) {
        err << "backend error: " << e.what() << '\n';
        return kExitBackend;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitBackend;
    }
    return kExitUsage;
}

}  // namespace mstream
