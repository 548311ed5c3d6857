#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mstream/backend.hpp"
#include "mstream/linear_backend.hpp"
#include "mstream/pipeline.hpp"

namespace mstream {

// Backend selection by name. Known names:
//   toy           seeded linear backend (ToyOptions)
//   toy-identity  identity configuration of the linear backend
//   linear-file   linear backend loaded from `weights`
struct BackendSpec {
    std::string name = "toy";
    ToyOptions toy;            // toy.seed is the backend seed
    std::string weights;       // linear-file only
};

std::shared_ptr<const Backend> make_backend(const BackendSpec& spec);

// Catalog entry. Exactly one source: an explicit vector, a seed for a random
// unit-range vector, or a motion file run through style_embed.
struct StyleSpec {
    std::string name;
    std::optional<std::vector<double>> vec;
    std::optional<std::uint64_t> seed;
    std::string motion;
};

struct StyleCatalog {
    std::vector<StyleEmbedding> styles;
    std::string default_style;

    const StyleEmbedding* find(const std::string& name) const;
    const StyleEmbedding& default_embedding() const;
};

// Seeded style vector of `dim` entries in [-1, 1).
std::vector<double> seeded_style(std::uint64_t seed, std::size_t dim);

// The built-in catalog used when a config lists no styles: neutral (zero),
// brisk (seed 1) and heavy (seed 2).
std::vector<StyleSpec> builtin_styles();

StyleCatalog build_catalog(const std::vector<StyleSpec>& specs, const std::string& default_style,
                           const Backend& backend, const std::filesystem::path& base_dir = {});

// Everything the CLI and the service read from a config file:
//
//   {"backend":  {"name":"toy","seed":0,"frame_width":263,...},
//    "pipeline": {"window":60,"stride":4,"reencode":30,"buffer":30,"alpha":0.8,...},
//    "styles":   [{"name":"neutral","vec":[...]}, {"name":"brisk","seed":1}, {"name":"x","motion":"x.motion"}],
//    "default_style": "neutral",
//    "listen": "127.0.0.1:8765",
//    "clock": "steady"}
//
// Every section and key is optional. Unknown keys are rejected.
struct AppConfig {
    BackendSpec backend;
    PipelineConfig pipeline;
    std::vector<StyleSpec> styles = builtin_styles();
    std::string default_style;
    std::string listen = "127.0.0.1:8765";
    std::string clock = "steady";  // "steady" or "tick" (deterministic, 1 ms per reading)
    std::filesystem::path base_dir;  // relative paths in the file resolve against this
};

BackendSpec backend_spec_from_json(const nlohmann::json& j, BackendSpec base = {});
nlohmann::ordered_json backend_spec_to_json(const BackendSpec& spec);
PipelineConfig pipeline_from_json(const nlohmann::json& j, PipelineConfig base = {});
nlohmann::ordered_json pipeline_to_json(const PipelineConfig& config);
std::vector<StyleSpec> styles_from_json(const nlohmann::json& j);

AppConfig app_config_from_json(const nlohmann::json& j, AppConfig base = {});
// Throws ConfigError for unreadable or invalid files.
AppConfig load_app_config(const std::filesystem::path& path);

// MSTREAM_LISTEN replaces `listen`; MSTREAM_SEED sets both the backend and
// the denoiser noise seed. `getenv` is injectable for tests.
void apply_env_overrides(AppConfig& config,
                         const std::function<const char*(const char*)>& getenv = nullptr);

std::uint64_t parse_seed(const std::string& text);

}  // namespace mstream
