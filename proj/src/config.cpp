#include "mstream/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <string_view>

#include "mstream/errors.hpp"
#include "mstream/motion_io.hpp"
#include "mstream/rng.hpp"

namespace mstream {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const char* section) {
    if (!j.is_object()) throw ConfigError(std::string(section) + " must be a JSON object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || item.key() == a;
        if (!ok) throw ConfigError(std::string(section) + ": unknown key '" + item.key() + "'");
    }
}

template <typename T>
void read_into(const json& j, const char* key, T& out, const char* section) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string(section) + "." + key + ": wrong type");
    }
}

// Unsigned fields must not silently wrap from negative JSON numbers.
void read_count(const json& j, const char* key, std::size_t& out, const char* section) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
        throw ConfigError(std::string(section) + "." + key + " must be a non-negative integer");
    }
    out = v.get<std::size_t>();
}

void read_seed(const json& j, const char* key, std::uint64_t& out, const char* section) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (v.is_string()) {
        out = parse_seed(v.get<std::string>());
        return;
    }
    if (!v.is_number_unsigned()) throw ConfigError(std::string(section) + "." + key + " must be a non-negative integer");
    out = v.get<std::uint64_t>();
}

}  // namespace

std::uint64_t parse_seed(const std::string& text) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size() || text.empty()) {
        throw ConfigError("seed must be a non-negative integer, got '" + text + "'");
    }
    return v;
}

std::shared_ptr<const Backend> make_backend(const BackendSpec& spec) {
    if (spec.name == "toy") return make_toy_backend(spec.toy);
    if (spec.name == "toy-identity") {
        const auto& t = spec.toy;
        return std::make_shared<const LinearBackend>(
            identity_params(t.frame_width, t.joint_count, t.max_window, t.style_dim, t.seed));
    }
    if (spec.name == "linear-file") {
        if (spec.weights.empty()) throw ConfigError("backend linear-file needs a 'weights' path");
        return std::make_shared<const LinearBackend>(load_linear_weights(spec.weights));
    }
    throw ConfigError("unknown backend '" + spec.name + "' (expected toy, toy-identity or linear-file)");
}

const StyleEmbedding* StyleCatalog::find(const std::string& name) const {
    for (const auto& s : styles) {
        if (s.label == name) return &s;
    }
    return nullptr;
}

const StyleEmbedding& StyleCatalog::default_embedding() const {
    const StyleEmbedding* s = find(default_style);
    if (!s) throw ConfigError("default style '" + default_style + "' is not in the catalog");
    return *s;
}

std::vector<double> seeded_style(std::uint64_t seed, std::size_t dim) {
    SplitMix64 rng(seed);
    std::vector<double> v(dim);
    for (double& x : v) x = rng.symmetric();
    return v;
}

std::vector<StyleSpec> builtin_styles() {
    return {StyleSpec{"neutral", std::vector<double>{}, std::nullopt, {}},
            StyleSpec{"brisk", std::nullopt, 1, {}},
            StyleSpec{"heavy", std::nullopt, 2, {}}};
}

StyleCatalog build_catalog(const std::vector<StyleSpec>& specs, const std::string& default_style,
                           const Backend& backend, const std::filesystem::path& base_dir) {
    if (specs.empty()) throw ConfigError("style catalog must not be empty");
    const std::size_t dim = backend.descriptor().style_dim;
    StyleCatalog catalog;
    for (const auto& spec : specs) {
        if (spec.name.empty()) throw ConfigError("style entries need a name");
        if (catalog.find(spec.name)) throw ConfigError("duplicate style '" + spec.name + "'");
        const int sources = int(spec.vec.has_value()) + int(spec.seed.has_value()) + int(!spec.motion.empty());
        if (sources != 1) throw ConfigError("style '" + spec.name + "' needs exactly one of vec, seed, motion");
        StyleEmbedding e;
        if (spec.vec) {
            // An empty vector is shorthand for the zero style.
            e.vec = spec.vec->empty() ? std::vector<double>(dim, 0.0) : *spec.vec;
        } else if (spec.seed) {
            e.vec = seeded_style(*spec.seed, dim);
        } else {
            std::filesystem::path p = spec.motion;
            if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
            try {
                e = backend.style_embed(read_motion_file(p).motion);
            } catch (const DataError& err) {
                throw ConfigError("style '" + spec.name + "': " + err.what());
            }
        }
        e.label = spec.name;
        try {
            backend.check_style(e);
        } catch (const Error& err) {
            throw ConfigError("style '" + spec.name + "': " + err.what());
        }
        catalog.styles.push_back(std::move(e));
    }
    catalog.default_style = default_style.empty() ? catalog.styles.front().label : default_style;
    catalog.default_embedding();
    return catalog;
}

BackendSpec backend_spec_from_json(const json& j, BackendSpec base) {
    const char* s = "backend";
    check_keys(j, {"name", "seed", "frame_width", "joint_count", "max_window", "tokens", "channels", "style_dim",
                   "noise", "causal_decay", "decoder_smoothing", "style_sensitive", "denoise_work", "weights"},
               s);
    read_into(j, "name", base.name, s);
    read_seed(j, "seed", base.toy.seed, s);
    read_count(j, "frame_width", base.toy.frame_width, s);
    read_count(j, "joint_count", base.toy.joint_count, s);
    read_count(j, "max_window", base.toy.max_window, s);
    read_count(j, "tokens", base.toy.tokens, s);
    read_count(j, "channels", base.toy.channels, s);
    read_count(j, "style_dim", base.toy.style_dim, s);
    read_into(j, "noise", base.toy.noise, s);
    read_into(j, "causal_decay", base.toy.causal_decay, s);
    read_into(j, "decoder_smoothing", base.toy.decoder_smoothing, s);
    read_into(j, "style_sensitive", base.toy.style_sensitive, s);
    read_into(j, "denoise_work", base.toy.denoise_work, s);
    read_into(j, "weights", base.weights, s);
    return base;
}

ordered_json backend_spec_to_json(const BackendSpec& spec) {
    const auto& t = spec.toy;
    ordered_json j{{"name", spec.name},
                   {"seed", t.seed},
                   {"frame_width", t.frame_width},
                   {"joint_count", t.joint_count},
                   {"max_window", t.max_window},
                   {"tokens", t.tokens},
                   {"channels", t.channels},
                   {"style_dim", t.style_dim},
                   {"noise", t.noise},
                   {"causal_decay", t.causal_decay},
                   {"decoder_smoothing", t.decoder_smoothing},
                   {"style_sensitive", t.style_sensitive},
                   {"denoise_work", t.denoise_work}};
    if (!spec.weights.empty()) j["weights"] = spec.weights;
    return j;
}

PipelineConfig pipeline_from_json(const json& j, PipelineConfig base) {
    const char* s = "pipeline";
    check_keys(j, {"window", "stride", "reencode", "buffer", "alpha", "steps", "mode", "warmup", "prefill",
                   "retention", "seed"},
               s);
    read_count(j, "window", base.window, s);
    read_count(j, "stride", base.stride, s);
    read_count(j, "reencode", base.reencode, s);
    read_count(j, "buffer", base.buffer_capacity, s);
    read_into(j, "alpha", base.alpha, s);
    read_into(j, "steps", base.steps, s);
    if (j.contains("mode")) {
        if (!j["mode"].is_string()) throw ConfigError("pipeline.mode must be a string");
        base.mode = parse_mode(j["mode"].get<std::string>());
    }
    if (j.contains("warmup")) {
        if (!j["warmup"].is_string()) throw ConfigError("pipeline.warmup must be a string");
        base.warmup = parse_warmup(j["warmup"].get<std::string>());
    }
    read_count(j, "prefill", base.prefill, s);
    read_count(j, "retention", base.retention, s);
    read_seed(j, "seed", base.seed, s);
    return base;
}

ordered_json pipeline_to_json(const PipelineConfig& c) {
    return ordered_json{{"window", c.window},
                        {"stride", c.stride},
                        {"reencode", c.reencode},
                        {"buffer", c.buffer_capacity},
                        {"alpha", c.alpha},
                        {"steps", c.steps},
                        {"mode", std::string(to_string(c.mode))},
                        {"warmup", std::string(to_string(c.warmup))},
                        {"prefill", c.prefill},
                        {"retention", c.retention},
                        {"seed", c.seed}};
}

std::vector<StyleSpec> styles_from_json(const json& j) {
    if (!j.is_array()) throw ConfigError("styles must be a JSON array");
    std::vector<StyleSpec> out;
    for (const auto& e : j) {
        check_keys(e, {"name", "vec", "seed", "motion"}, "styles[]");
        StyleSpec spec;
        read_into(e, "name", spec.name, "styles[]");
        if (e.contains("vec")) {
            std::vector<double> v;
            read_into(e, "vec", v, "styles[]");
            spec.vec = std::move(v);
        }
        if (e.contains("seed")) {
            std::uint64_t seed = 0;
            read_seed(e, "seed", seed, "styles[]");
            spec.seed = seed;
        }
        read_into(e, "motion", spec.motion, "styles[]");
        out.push_back(std::move(spec));
    }
    return out;
}

AppConfig app_config_from_json(const json& j, AppConfig base) {
    check_keys(j, {"backend", "pipeline", "styles", "default_style", "listen", "clock"}, "config");
    if (j.contains("backend")) base.backend = backend_spec_from_json(j["backend"], base.backend);
    if (j.contains("pipeline")) base.pipeline = pipeline_from_json(j["pipeline"], base.pipeline);
    if (j.contains("styles")) base.styles = styles_from_json(j["styles"]);
    read_into(j, "default_style", base.default_style, "config");
    read_into(j, "listen", base.listen, "config");
    read_into(j, "clock", base.clock, "config");
    if (base.clock != "steady" && base.clock != "tick") {
        throw ConfigError("config.clock must be 'steady' or 'tick'");
    }
    return base;
}

AppConfig load_app_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    AppConfig base;
    base.base_dir = path.parent_path();
    return app_config_from_json(j, std::move(base));
}

void apply_env_overrides(AppConfig& config, const std::function<const char*(const char*)>& getenv) {
    auto get = [&](const char* name) -> const char* { return getenv ? getenv(name) : std::getenv(name); };
    if (const char* listen = get("MSTREAM_LISTEN"); listen && *listen) config.listen = listen;
    if (const char* seed = get("MSTREAM_SEED"); seed && *seed) {
        const std::uint64_t v = parse_seed(seed);
        config.backend.toy.seed = v;
        config.pipeline.seed = v;
    }
}

}  // namespace mstream
