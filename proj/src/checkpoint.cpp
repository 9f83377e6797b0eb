#include "cdknet/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cdknet/errors.hpp"

namespace cdknet {

using nlohmann::json;

namespace {

constexpr int kCheckpointSchema = 1;

std::string activation_name(Activation a) {
    return a == Activation::ReLU ? "relu" : "identity";
}

Activation activation_from(const std::string& s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "identity") return Activation::Identity;
    throw FormatError("unknown activation '" + s + "' in checkpoint");
}

}  // namespace

void atomic_write_text(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open for writing: " + tmp);
        out << contents;
        if (!out) throw Error("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json doc;
    doc["schema"] = kCheckpointSchema;
    doc["seed"] = ckpt.seed;
    json layers = json::array();
    for (const Layer& layer : ckpt.extractor.layers) {
        layers.push_back({{"input_dim", layer.spec.input_dim},
                          {"output_dim", layer.spec.output_dim},
                          {"activation", activation_name(layer.spec.activation)},
                          {"weights", layer.weight.data()},
                          {"bias", layer.bias}});
    }
    doc["extractor"] = {{"layers", layers}};
    doc["head"] = {{"classes", ckpt.head.classes()},
                   {"latent_dim", ckpt.head.weight.rows()},
                   {"weights", ckpt.head.weight.data()},
                   {"bias", ckpt.head.bias}};
    atomic_write_text(path, doc.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
    if (!std::filesystem::exists(path)) throw MissingArtifact("checkpoint not found", path);
    std::ifstream in(path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw FormatError("unparsable checkpoint " + path + ": " + e.what());
    }
    try {
        if (doc.at("schema").get<int>() != kCheckpointSchema)
            throw FormatError("unsupported checkpoint schema in " + path);
        Checkpoint ckpt;
        ckpt.seed = doc.at("seed").get<std::uint64_t>();
        for (const json& jl : doc.at("extractor").at("layers")) {
            Layer layer;
            layer.spec.input_dim = jl.at("input_dim").get<std::size_t>();
            layer.spec.output_dim = jl.at("output_dim").get<std::size_t>();
            layer.spec.activation = activation_from(jl.at("activation").get<std::string>());
            layer.weight = Matrix::from_data(layer.spec.input_dim, layer.spec.output_dim,
                                             jl.at("weights").get<std::vector<double>>());
            layer.bias = jl.at("bias").get<std::vector<double>>();
            if (layer.bias.size() != layer.spec.output_dim)
                throw FormatError("bias length mismatch in " + path);
            ckpt.extractor.layers.push_back(std::move(layer));
        }
        if (ckpt.extractor.layers.empty()) throw FormatError("checkpoint has no layers: " + path);
        const json& jh = doc.at("head");
        const auto classes = jh.at("classes").get<std::size_t>();
        const auto latent = jh.at("latent_dim").get<std::size_t>();
        ckpt.head.weight =
            Matrix::from_data(latent, classes, jh.at("weights").get<std::vector<double>>());
        ckpt.head.bias = jh.at("bias").get<std::vector<double>>();
        if (ckpt.head.bias.size() != classes) throw FormatError("head bias mismatch in " + path);
        return ckpt;
    } catch (const json::exception& e) {
        throw FormatError("malformed checkpoint " + path + ": " + e.what());
    }
}

}  // namespace cdknet
