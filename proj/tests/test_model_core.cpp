#include "latim/bundle.hpp"
#include "latim/errors.hpp"
#include "latim/rng.hpp"
#include "latim/weights.hpp"

#include <doctest.h>

#include <cstring>
#include <nlohmann/json.hpp>

using namespace latim;

namespace {

model_config c1(variant v = variant::mamba1) {
    return model_config::with_defaults(v, 2, 8, 4, 4, v == variant::mamba2 ? 4 : 1, 16);
}

template <class F>
void for_each_tensor(const model_weights<double>& w, const model_config& c, F&& f) {
    auto copy = w;
    visit_tensors(copy, c, [&](const std::string& name, const auto&, auto& t) { f(name, t); });
}

// Rewrites the manifest of a serialized bundle and re-frames it.
std::vector<std::uint8_t> edit_manifest(const std::vector<std::uint8_t>& bytes,
                                        const std::function<void(nlohmann::json&)>& edit) {
    std::uint64_t len = 0;
    std::memcpy(&len, bytes.data() + 8, 8);
    auto manifest = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<long>(len));
    edit(manifest);
    const std::string text = manifest.dump(2);
    std::vector<std::uint8_t> out(bytes.begin(), bytes.begin() + 8);
    const std::uint64_t new_len = text.size();
    out.resize(16);
    std::memcpy(out.data() + 8, &new_len, 8);
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), bytes.begin() + 16 + static_cast<long>(len), bytes.end());
    return out;
}

} // namespace

TEST_CASE("config defaults and validation") {
    const auto c = model_config::with_defaults(variant::mamba1, 2, 32, 16, 4, 1, 32);
    CHECK(c.inner_dim == 64);
    CHECK(c.dt_rank == 2);
    CHECK_NOTHROW(c.validate());

    auto bad = model_config::with_defaults(variant::mamba2, 1, 8, 4, 4, 3, 16);
    CHECK_THROWS_AS(bad.validate(), config_error);

    auto zero_dim = c;
    zero_dim.model_dim = 0;
    CHECK_THROWS_AS(zero_dim.validate(), config_error);

    auto empty_stack = c;
    empty_stack.num_layers = 0;
    CHECK_NOTHROW(empty_stack.validate());

    CHECK_THROWS_AS(parse_variant("mamba3"), config_error);
    CHECK(parse_strategy("taylor2") == activation_strategy::taylor2);
    CHECK(forward_activation(activation_strategy::taylor1) == conv_activation::silu);
    CHECK(forward_activation(activation_strategy::relu) == conv_activation::relu);
    CHECK(forward_activation(activation_strategy::identity) == conv_activation::identity);
}

TEST_CASE("counter rng is reproducible and stream separated") {
    counter_rng a(7, "embed"), b(7, "embed"), c(7, "norm"), d(8, "embed");
    CHECK(a.bits(3) == b.bits(3));
    CHECK(a.bits(3) != c.bits(3));
    CHECK(a.bits(3) != d.bits(3));
    double sum = 0, sq = 0;
    const int n = 20000;
    for (int k = 0; k < n; ++k) {
        const double u = a.uniform(static_cast<std::uint64_t>(k));
        CHECK((u >= 0 && u < 1));
        const double z = a.normal(static_cast<std::uint64_t>(k));
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.05);
    CHECK(std::abs(sq / n - 1) < 0.05);
    for (int k = 0; k < 1000; ++k) CHECK(a.below(static_cast<std::uint64_t>(k), 5) < 5);
}

TEST_CASE("random model generation is deterministic per seed") {
    for (auto v : {variant::mamba1, variant::mamba2}) {
        const auto c = c1(v);
        CHECK(serialize_bundle(generate_random_model(c, 7), c) == serialize_bundle(generate_random_model(c, 7), c));
        const auto w7 = generate_random_model(c, 7), w8 = generate_random_model(c, 8);
        bool differs = false;
        CHECK(w7.embed.rows() == c.vocab_size);
        differs = (w7.embed - w8.embed).cwiseAbs().maxCoeff() > 0;
        CHECK(differs);
        CHECK_NOTHROW(check_shapes(w7, c));
    }
    auto bad = c1(variant::mamba2);
    bad.num_heads = 3;
    CHECK_THROWS_AS(generate_random_model(bad, 1), config_error);
}

TEST_CASE("required tensors follow the variant") {
    const auto names1 = required_tensors(c1(variant::mamba1));
    const auto names2 = required_tensors(c1(variant::mamba2));
    auto has = [](const std::vector<tensor_ref>& v, const std::string& n) {
        return std::any_of(v.begin(), v.end(), [&](const tensor_ref& t) { return t.name == n; });
    };
    CHECK(has(names1, "layers.0.dt_down"));
    CHECK_FALSE(has(names1, "layers.0.gn_gamma"));
    CHECK(has(names2, "layers.1.gn_beta"));
    CHECK_FALSE(has(names2, "layers.0.dt_up"));
    CHECK_FALSE(has(names1, "head"));
    auto untied = c1();
    untied.tied_head = false;
    CHECK(has(required_tensors(untied), "head"));
}

TEST_CASE("bundle round trip is bit exact") {
    for (auto v : {variant::mamba1, variant::mamba2}) {
        for (auto dt : {dtype::f64, dtype::f32}) {
            auto c = c1(v);
            c.precision = dt;
            c.tied_head = dt == dtype::f64;
            const auto w = generate_random_model(c, 11);
            const auto bytes = serialize_bundle(w, c);
            const auto b = parse_bundle(bytes);
            CHECK(b.config == c);
            std::vector<std::vector<double>> before, after;
            for_each_tensor(w, c, [&](const std::string&, const auto& t) {
                before.emplace_back(t.data(), t.data() + t.size());
            });
            for_each_tensor(b.weights, c, [&](const std::string&, const auto& t) {
                after.emplace_back(t.data(), t.data() + t.size());
            });
            CHECK(before == after);
            CHECK(serialize_bundle(b.weights, b.config) == bytes);
        }
    }
}

TEST_CASE("bundle load errors are specific") {
    const auto c = c1(variant::mamba2);
    const auto bytes = serialize_bundle(generate_random_model(c, 3), c);

    auto expect_kind = [](const std::vector<std::uint8_t>& b, bundle_error_kind kind) -> std::string {
        try {
            parse_bundle(b);
        } catch (const bundle_error& e) {
            CHECK(e.kind() == kind);
            return e.tensor();
        }
        FAIL("expected a bundle error");
        return {};
    };

    SUBCASE("truncated payload") {
        auto cut = bytes;
        cut.pop_back();
        expect_kind(cut, bundle_error_kind::checksum);
    }
    SUBCASE("flipped payload byte") {
        auto flipped = bytes;
        flipped.back() ^= 0x01;
        expect_kind(flipped, bundle_error_kind::checksum);
    }
    SUBCASE("bad magic") {
        auto wrong = bytes;
        wrong[0] = 'X';
        expect_kind(wrong, bundle_error_kind::format);
    }
    SUBCASE("shape edited to the wrong rank") {
        const auto edited = edit_manifest(bytes, [](nlohmann::json& m) {
            for (auto& t : m["tensors"])
                if (t["name"] == "layers.1.in_x") t["shape"] = nlohmann::json::array({8});
        });
        CHECK(expect_kind(edited, bundle_error_kind::shape_mismatch) == "layers.1.in_x");
    }
    SUBCASE("missing tensor") {
        const auto edited = edit_manifest(bytes, [](nlohmann::json& m) {
            auto& list = m["tensors"];
            for (std::size_t k = 0; k < list.size(); ++k)
                if (list[k]["name"] == "layers.0.a_log") {
                    list.erase(k);
                    break;
                }
        });
        CHECK(expect_kind(edited, bundle_error_kind::missing_tensor) == "layers.0.a_log");
    }
    SUBCASE("dtype disagreement") {
        const auto edited = edit_manifest(bytes, [](nlohmann::json& m) {
            for (auto& t : m["tensors"])
                if (t["name"] == "embed") t["dtype"] = "f32";
        });
        CHECK(expect_kind(edited, bundle_error_kind::dtype_mismatch) == "embed");
    }
    SUBCASE("invalid config") {
        const auto edited = edit_manifest(bytes, [](nlohmann::json& m) { m["config"]["num_heads"] = 3; });
        CHECK_THROWS_AS(parse_bundle(edited), config_error);
    }
}
