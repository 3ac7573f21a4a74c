#include "latim/bundle.hpp"
#include "latim/errors.hpp"

#include <nlohmann/json.hpp>
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace latim {

namespace {

using json = nlohmann::json;
constexpr char magic[4] = {'L', 'T', 'I', 'M'};

template <class U>
void put_le(std::vector<std::uint8_t>& out, U v) {
    for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

template <class U>
U get_le(const std::uint8_t* p) {
    U v = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(p[b]) << (8 * b);
    return v;
}

template <class F>
void append_float(std::vector<std::uint8_t>& out, F v) {
    using bits_t = std::conditional_t<sizeof(F) == 4, std::uint32_t, std::uint64_t>;
    put_le(out, std::bit_cast<bits_t>(v));
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
        crc = crc32(crc, bytes.data() + pos, n);
        pos += n;
    }
    return static_cast<std::uint32_t>(crc);
}

json config_to_json(const model_config& c) {
    return json{{"variant", to_string(c.arch)},
                {"num_layers", c.num_layers},
                {"model_dim", c.model_dim},
                {"inner_dim", c.inner_dim},
                {"state_dim", c.state_dim},
                {"conv_width", c.conv_width},
                {"num_heads", c.num_heads},
                {"vocab_size", c.vocab_size},
                {"dt_rank", c.dt_rank},
                {"tied_head", c.tied_head},
                {"activation_strategy", to_string(c.strategy)},
                {"dtype", to_string(c.precision)}};
}

model_config config_from_json(const json& j) {
    model_config c;
    c.arch = parse_variant(j.at("variant").get<std::string>());
    c.num_layers = j.at("num_layers").get<int>();
    c.model_dim = j.at("model_dim").get<int>();
    c.inner_dim = j.at("inner_dim").get<int>();
    c.state_dim = j.at("state_dim").get<int>();
    c.conv_width = j.at("conv_width").get<int>();
    c.num_heads = j.at("num_heads").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.dt_rank = j.at("dt_rank").get<int>();
    c.tied_head = j.at("tied_head").get<bool>();
    c.strategy = parse_strategy(j.at("activation_strategy").get<std::string>());
    c.precision = parse_dtype(j.at("dtype").get<std::string>());
    return c;
}

[[noreturn]] void fail(bundle_error_kind kind, const std::string& tensor, const std::string& msg) {
    throw bundle_error(kind, tensor, msg);
}

} // namespace

std::vector<std::uint8_t> serialize_bundle(const model_weights<double>& weights, const model_config& config) {
    config.validate();
    check_shapes(weights, config);

    const bool f32 = config.precision == dtype::f32;
    const std::size_t elem = f32 ? 4 : 8;
    std::vector<std::uint8_t> payload;
    json directory = json::array();
    visit_tensors(weights, config, [&](const std::string& name, const std::vector<std::int64_t>& shape, const auto& t) {
        const std::size_t offset = payload.size();
        const double* p = t.data();
        for (index_t k = 0; k < t.size(); ++k) {
            if (f32) append_float(payload, static_cast<float>(p[k]));
            else append_float(payload, p[k]);
        }
        directory.push_back(json{{"name", name},
                                 {"dtype", to_string(config.precision)},
                                 {"shape", shape},
                                 {"offset", offset},
                                 {"length", static_cast<std::size_t>(t.size()) * elem}});
    });

    const json manifest{{"format_version", bundle_format_version},
                        {"config", config_to_json(config)},
                        {"payload_bytes", payload.size()},
                        {"checksum", json{{"algorithm", "crc32"}, {"value", crc32_of(payload)}}},
                        {"tensors", directory}};
    const std::string text = manifest.dump(2);

    std::vector<std::uint8_t> out(std::begin(magic), std::end(magic));
    put_le(out, bundle_format_version);
    put_le(out, static_cast<std::uint64_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

bundle parse_bundle(std::span<const std::uint8_t> bytes) {
    constexpr std::size_t header = 4 + 4 + 8;
    if (bytes.size() < header || std::memcmp(bytes.data(), magic, 4) != 0)
        fail(bundle_error_kind::format, "", "not a weight bundle (bad magic)");
    const auto version = get_le<std::uint32_t>(bytes.data() + 4);
    if (version != bundle_format_version)
        fail(bundle_error_kind::format, "", "unsupported bundle version " + std::to_string(version));
    const auto manifest_len = get_le<std::uint64_t>(bytes.data() + 8);
    if (manifest_len > bytes.size() - header) fail(bundle_error_kind::format, "", "manifest runs past end of file");

    json manifest;
    try {
        manifest = json::parse(bytes.begin() + header, bytes.begin() + static_cast<std::ptrdiff_t>(header + manifest_len));
    } catch (const json::exception& e) {
        fail(bundle_error_kind::format, "", std::string("malformed manifest: ") + e.what());
    }
    const auto payload = bytes.subspan(header + manifest_len);

    bundle out;
    std::map<std::string, json> directory;
    std::uint32_t expected_crc = 0;
    try {
        out.config = config_from_json(manifest.at("config"));
        expected_crc = manifest.at("checksum").at("value").get<std::uint32_t>();
        for (const auto& entry : manifest.at("tensors")) {
            const auto name = entry.at("name").get<std::string>();
            if (!directory.emplace(name, entry).second)
                fail(bundle_error_kind::format, name, "duplicate tensor '" + name + "' in manifest");
        }
    } catch (const json::exception& e) {
        fail(bundle_error_kind::format, "", std::string("malformed manifest: ") + e.what());
    }
    out.config.validate();

    if (crc32_of(payload) != expected_crc)
        fail(bundle_error_kind::checksum, "", "payload checksum mismatch (file truncated or corrupt)");

    const std::size_t elem = out.config.precision == dtype::f32 ? 4 : 8;
    const std::string dtype_name(to_string(out.config.precision));
    struct extent {
        std::uint64_t offset, length;
        std::string name;
        bool operator<(const extent& o) const { return offset < o.offset; }
    };
    std::vector<extent> extents;

    out.weights.layers.resize(static_cast<std::size_t>(out.config.num_layers));
    visit_tensors(out.weights, out.config, [&](const std::string& name, const std::vector<std::int64_t>& shape, auto& t) {
        const auto it = directory.find(name);
        if (it == directory.end()) fail(bundle_error_kind::missing_tensor, name, "missing tensor '" + name + "'");
        const json& entry = it->second;
        std::vector<std::int64_t> stored_shape;
        std::uint64_t offset = 0, length = 0;
        std::string stored_dtype;
        try {
            stored_shape = entry.at("shape").get<std::vector<std::int64_t>>();
            offset = entry.at("offset").get<std::uint64_t>();
            length = entry.at("length").get<std::uint64_t>();
            stored_dtype = entry.at("dtype").get<std::string>();
        } catch (const json::exception& e) {
            fail(bundle_error_kind::format, name, "malformed entry for tensor '" + name + "': " + e.what());
        }
        if (stored_shape != shape)
            fail(bundle_error_kind::shape_mismatch, name, "shape mismatch for tensor '" + name + "'");
        if (stored_dtype != dtype_name)
            fail(bundle_error_kind::dtype_mismatch, name, "dtype mismatch for tensor '" + name + "'");
        detail::resize_to(t, shape);
        const auto count = static_cast<std::uint64_t>(t.size());
        if (length != count * elem)
            fail(bundle_error_kind::format, name, "byte length disagrees with shape for tensor '" + name + "'");
        if (offset > payload.size() || length > payload.size() - offset)
            fail(bundle_error_kind::format, name, "tensor '" + name + "' lies outside the payload");
        extents.push_back({offset, length, name});

        const std::uint8_t* src = payload.data() + offset;
        double* dst = t.data();
        for (std::uint64_t k = 0; k < count; ++k) {
            if (elem == 4) dst[k] = std::bit_cast<float>(get_le<std::uint32_t>(src + 4 * k));
            else dst[k] = std::bit_cast<double>(get_le<std::uint64_t>(src + 8 * k));
        }
        directory.erase(it);
    });

    if (!directory.empty())
        fail(bundle_error_kind::format, directory.begin()->first,
             "unexpected tensor '" + directory.begin()->first + "' for this config");

    std::sort(extents.begin(), extents.end());
    for (std::size_t k = 1; k < extents.size(); ++k)
        if (extents[k - 1].offset + extents[k - 1].length > extents[k].offset)
            fail(bundle_error_kind::format, extents[k].name, "tensor '" + extents[k].name + "' overlaps '" +
                                                                 extents[k - 1].name + "'");
    return out;
}

void save_bundle(const model_weights<double>& weights, const model_config& config,
                 const std::filesystem::path& path) {
    const auto bytes = serialize_bundle(weights, config);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(bundle_error_kind::io, "", "cannot open '" + path.string() + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) fail(bundle_error_kind::io, "", "write to '" + path.string() + "' failed");
}

bundle load_bundle(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(bundle_error_kind::io, "", "cannot open '" + path.string() + "'");
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_bundle(bytes);
}

} // namespace latim
