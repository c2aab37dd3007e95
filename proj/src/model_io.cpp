#include "trer/model.hpp"

#include <string>

#include "trer/errors.hpp"
#include "trer/json_conv.hpp"
#include "trer/serialize.hpp"

namespace trer {

namespace {

constexpr std::uint16_t kWeightsVersion = 1;
constexpr char kWeightsMagic[4] = {'T', 'R', 'R', 'W'};

} // namespace

void save_weights(const ModelConfig& cfg, const ModelWeights& w,
                  const std::filesystem::path& path) {
    cfg.validate();

    // Payload: raw little-endian doubles, tensors in canonical order.
    ByteWriter payload;
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& t : w.tensors()) {
        tensors.push_back({{"name", t.name},
                           {"rows", t.rows},
                           {"cols", t.cols},
                           {"offset", payload.size()}});
        for (std::size_t i = 0; i < t.size(); ++i) {
            payload.f64(t.data[i]);
        }
    }

    nlohmann::json header;
    header["config"] = cfg;
    header["tensors"] = std::move(tensors);
    header["payload_bytes"] = payload.size();
    header["payload_crc32"] = crc32(payload.buffer());
    const std::string header_str = header.dump();

    ByteWriter file;
    file.str(std::string(kWeightsMagic, 4));
    file.u16(kWeightsVersion);
    file.u32(static_cast<std::uint32_t>(header_str.size()));
    file.str(header_str);
    file.bytes(payload.buffer());
    file.write_file(path);
}

LoadedWeights load_weights(const std::filesystem::path& path) {
    ByteReader r = ByteReader::from_file(path);
    if (r.size() < 4 ||
        std::string(reinterpret_cast<const char*>(r.all().data()), 4) !=
            std::string(kWeightsMagic, 4)) {
        throw FormatError("weights " + path.string() +
                          ": bad magic at offset 0");
    }
    r.str(4);
    const auto version = r.u16();
    if (version != kWeightsVersion) {
        throw FormatError("weights " + path.string() + ": version " +
                          std::to_string(version) + " not supported");
    }
    const std::uint32_t header_len = r.u32();

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(r.str(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("weights " + path.string() +
                          ": unreadable header: " + e.what());
    }

    LoadedWeights loaded;
    try {
        loaded.config = header.at("config").get<ModelConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("weights " + path.string() + ": bad config: " +
                          e.what());
    }
    try {
        loaded.config.validate();
    } catch (const ConfigError& e) {
        throw FormatError("weights " + path.string() + ": " + e.what());
    }

    loaded.weights = zero_weights(loaded.config);
    const auto expected = loaded.weights.tensors();
    if (!header.contains("tensors") ||
        header["tensors"].size() != expected.size()) {
        throw FormatError("weights " + path.string() + ": header lists " +
                          std::to_string(header.value(
                              "tensors", nlohmann::json::array()).size()) +
                          " tensors, config implies " +
                          std::to_string(expected.size()));
    }

    const std::size_t payload_bytes =
        header.value("payload_bytes", std::size_t{0});
    if (r.remaining() != payload_bytes) {
        throw FormatError("weights " + path.string() + ": payload is " +
                          std::to_string(r.remaining()) +
                          " bytes, header declares " +
                          std::to_string(payload_bytes));
    }
    const std::uint32_t declared_crc =
        header.value("payload_crc32", std::uint32_t{0});
    const std::uint32_t actual_crc =
        crc32({r.all().data() + r.offset(), r.remaining()});
    if (declared_crc != actual_crc) {
        throw FormatError("weights " + path.string() +
                          ": payload checksum mismatch");
    }

    for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto& t = header["tensors"][i];
        const auto name = t.value("name", std::string{});
        const auto rows = t.value("rows", std::size_t{0});
        const auto cols = t.value("cols", std::size_t{0});
        auto& exp = expected[i];
        if (name != exp.name || rows != exp.rows || cols != exp.cols) {
            throw FormatError(
                "weights " + path.string() + ": tensor " + name + " is " +
                std::to_string(rows) + "x" + std::to_string(cols) +
                ", config (d=" + std::to_string(loaded.config.d) +
                ", k=" + std::to_string(loaded.config.k) + ", d_h=" +
                std::to_string(loaded.config.d_h) + ") expects " + exp.name +
                " " + std::to_string(exp.rows) + "x" +
                std::to_string(exp.cols));
        }
        const std::size_t offset = t.value("offset", std::size_t{0});
        if (offset + exp.size() * 8 > payload_bytes) {
            throw FormatError("weights " + path.string() + ": tensor " +
                              name + " overruns the payload");
        }
    }

    // Offsets were validated against the canonical order; read in order.
    for (auto& t : loaded.weights.tensors()) {
        r.f64_block({t.data, t.size()});
    }
    for (const auto& t : loaded.weights.tensors()) {
        if (!all_finite({t.data, t.size()})) {
            throw FormatError("weights " + path.string() +
                              ": non-finite values in " + t.name);
        }
    }
    return loaded;
}

} // namespace trer
