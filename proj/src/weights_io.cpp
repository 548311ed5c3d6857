#include <fstream>
#include <string>

#include "json.hpp"
#include "mstream/errors.hpp"
#include "mstream/linear_backend.hpp"

namespace mstream {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "mstream-linear/1";

json matrix_to_json(const Matrix& m) {
    json j{{"rows", m.rows()}, {"cols", m.cols()}};
    if (m.is_identity()) {
        j["identity"] = true;
    } else {
        j["data"] = m.dense();
    }
    return j;
}

Matrix matrix_from_json(const json& j, const char* name) {
    try {
        const auto rows = j.at("rows").get<std::size_t>();
        const auto cols = j.at("cols").get<std::size_t>();
        if (j.value("identity", false)) {
            if (rows != cols) throw DataError(std::string(name) + ": identity matrix must be square");
            return Matrix::identity(rows);
        }
        return Matrix(rows, cols, j.at("data").get<std::vector<double>>());
    } catch (const json::exception& e) {
        throw DataError(std::string("weights: matrix '") + name + "': " + e.what());
    } catch (const DimensionError& e) {
        throw DataError(std::string("weights: matrix '") + name + "': " + e.what());
    }
}

}  // namespace

void save_linear_weights(const LinearParams& p, const std::filesystem::path& path) {
    json j;
    j["format"] = kFormat;
    j["name"] = p.name;
    j["frame_width"] = p.frame_width;
    j["tokens"] = p.tokens;
    j["channels"] = p.channels;
    j["style_dim"] = p.style_dim;
    j["joint_count"] = p.joint_count;
    j["max_window"] = p.max_window;
    j["decoder_kernel"] = p.decoder_kernel;
    j["causal_decay"] = p.causal_decay;
    j["noise"] = p.noise;
    j["denoise_work"] = p.denoise_work;
    j["seed"] = p.seed;
    j["encoder"] = matrix_to_json(p.encoder);
    j["decoder"] = matrix_to_json(p.decoder);
    j["style_proj"] = matrix_to_json(p.style_proj);
    j["joint_map"] = matrix_to_json(p.joint_map);
    j["style_embed_proj"] = matrix_to_json(p.style_embed_proj);
    j["mixing"] = matrix_to_json(p.mixing);
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    // nlohmann prints doubles with max_digits10, so values round-trip exactly.
    out << j.dump() << '\n';
}

LinearParams load_linear_weights(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open weights file '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError("weights file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    if (j.value("format", std::string()) != kFormat) {
        throw DataError("weights file '" + path.string() + "': expected format " + kFormat);
    }
    LinearParams p;
    try {
        p.name = j.value("name", std::string("linear"));
        p.frame_width = j.at("frame_width").get<std::size_t>();
        p.tokens = j.at("tokens").get<std::size_t>();
        p.channels = j.at("channels").get<std::size_t>();
        p.style_dim = j.at("style_dim").get<std::size_t>();
        p.joint_count = j.at("joint_count").get<std::size_t>();
        p.max_window = j.at("max_window").get<std::size_t>();
        p.decoder_kernel = j.at("decoder_kernel").get<std::vector<double>>();
        p.causal_decay = j.at("causal_decay").get<double>();
        p.noise = j.value("noise", 0.0);
        p.denoise_work = j.value("denoise_work", 0);
        p.seed = j.value("seed", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw DataError("weights file '" + path.string() + "': " + e.what());
    }
    p.encoder = matrix_from_json(j.at("encoder"), "encoder");
    p.decoder = matrix_from_json(j.at("decoder"), "decoder");
    p.style_proj = matrix_from_json(j.at("style_proj"), "style_proj");
    p.joint_map = matrix_from_json(j.at("joint_map"), "joint_map");
    p.style_embed_proj = matrix_from_json(j.at("style_embed_proj"), "style_embed_proj");
    if (j.contains("mixing")) p.mixing = matrix_from_json(j["mixing"], "mixing");
    return p;
}

}  // namespace mstream
