// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "loralego/errors.hpp"
#include "loralego/msu.hpp"
#include "loralego/rng.hpp"

using namespace loralego;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (auto& v : m.data()) {
        v = rng.gaussian();
    }
    return m;
}

LoraLayer random_layer(std::size_t rank, std::size_t d_in, std::size_t d_out, Rng& rng) {
    return {random_matrix(rank, d_in, rng), random_matrix(d_out, rank, rng)};
}

LoraAdapter one_layer_adapter(LoraLayer layer, double alpha) {
    LoraAdapter adapter;
    adapter.name = "phi";
    adapter.rank = layer.rank();
    adapter.alpha = alpha;
    adapter.layers.emplace("l", std::move(layer));
    return adapter;
}

}  // namespace

TEST_CASE("extract reads rows of A and columns of B") {
    LoraLayer layer{Matrix(2, 2, {1, 2, 3, 4}), Matrix(2, 2, {5, 6, 7, 8})};
    const auto msus = extract_msus(layer, {"phi", "l", 0});
    REQUIRE(msus.size() == 2);
    CHECK(msus[0].combined() == std::vector<double>{1, 2, 5, 7});
    CHECK(msus[1].combined() == std::vector<double>{3, 4, 6, 8});
    CHECK(msus[0].source.rank_index == 0);
    CHECK(msus[1].source.rank_index == 1);
}

TEST_CASE("rank-1 layer yields a single MSU") {
    Rng rng(1);
    const LoraLayer layer = random_layer(1, 5, 3, rng);
    const auto msus = extract_msus(layer, {"phi", "l", 0});
    REQUIRE(msus.size() == 1);
    CHECK(msus[0].a == std::vector<double>(layer.a.row(0).begin(), layer.a.row(0).end()));
    CHECK(msus[0].b == layer.b.col(0));
}

TEST_CASE("extract then assemble is bit-exact") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const LoraLayer layer = random_layer(1 + rng.uniform_below(8), 1 + rng.uniform_below(9),
                                             1 + rng.uniform_below(9), rng);
        const LoraLayer back = assemble_layer(extract_msus(layer, {"phi", "l", 0}));
        CHECK(back.a.data() == layer.a.data());
        CHECK(back.b.data() == layer.b.data());
    }
}

TEST_CASE("assembling reversed MSUs keeps the delta") {
    Rng rng(3);
    const LoraLayer layer = random_layer(6, 8, 7, rng);
    auto msus = extract_msus(layer, {"phi", "l", 0});
    std::reverse(msus.begin(), msus.end());
    const LoraLayer reversed = assemble_layer(msus);
    CHECK(max_abs_diff(delta_weight(reversed), delta_weight(layer)) < 1e-12);
}

TEST_CASE("assemble rejects empty or ragged input") {
    CHECK_THROWS_AS(assemble_layer(std::vector<Msu>{}), ValidationError);
    Msu a{{1, 2}, {3}, {}};
    Msu b{{1}, {3}, {}};
    CHECK_THROWS_AS(assemble_layer(std::vector<Msu>{a, b}), ValidationError);
}

TEST_CASE("permute_layer identity and composition") {
    Rng rng(4);
    const LoraLayer layer = random_layer(5, 6, 4, rng);
    const LoraLayer same = permute_layer(layer, PermutationSpec::identity(5));
    CHECK(same.a.data() == layer.a.data());
    CHECK(same.b.data() == layer.b.data());

    const PermutationSpec p = PermutationSpec::random(5, rng);
    const LoraLayer twice = permute_layer(permute_layer(layer, p), p);
    const LoraLayer composed = permute_layer(layer, compose(p, p));
    CHECK(twice.a.data() == composed.a.data());
    CHECK(twice.b.data() == composed.b.data());
}

TEST_CASE("permutation invariance of the delta over 100 random instances") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t rank = 2 + rng.uniform_below(10);
        const LoraLayer layer =
            random_layer(rank, 1 + rng.uniform_below(12), 1 + rng.uniform_below(12), rng);
        const PermutationSpec p = PermutationSpec::random(rank, rng);
        CHECK(max_abs_diff(delta_weight(permute_layer(layer, p)), delta_weight(layer)) <
              1e-12);
    }
}

TEST_CASE("permute_layer rejects wrong length") {
    Rng rng(6);
    const LoraLayer layer = random_layer(4, 3, 3, rng);
    CHECK_THROWS_AS(permute_layer(layer, PermutationSpec::identity(3)), DimensionError);
}

TEST_CASE("concat of one layer with weight 1 is the layer") {
    Rng rng(7);
    const LoraLayer layer = random_layer(3, 5, 4, rng);
    const LoraLayer out = concat_layers(std::vector<LoraLayer>{layer}, std::vector<double>{1.0});
    CHECK(out.a.data() == layer.a.data());
    CHECK(out.b.data() == layer.b.data());
}

TEST_CASE("concatenation-summation equivalence") {
    Rng rng(8);
    SUBCASE("two rank-1 layers, unit weights") {
        const LoraLayer l1 = random_layer(1, 6, 5, rng);
        const LoraLayer l2 = random_layer(1, 6, 5, rng);
        const LoraLayer cat =
            concat_layers(std::vector<LoraLayer>{l1, l2}, std::vector<double>{1.0, 1.0});
        CHECK(cat.rank() == 2);
        const Matrix expected = add(delta_weight(l1), delta_weight(l2));
        CHECK(max_abs_diff(delta_weight(cat), expected) < 1e-12);
    }
    SUBCASE("2..5 random layers with random weights") {
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t n = 2 + rng.uniform_below(4);
            std::vector<LoraLayer> layers;
            std::vector<double> weights;
            Matrix expected(4, 6);
            for (std::size_t i = 0; i < n; ++i) {
                layers.push_back(random_layer(1 + rng.uniform_below(4), 6, 4, rng));
                weights.push_back(rng.gaussian());
                expected = add(expected, delta_weight(layers.back(), weights.back()));
            }
            const LoraLayer cat = concat_layers(layers, weights);
            CHECK(max_abs_diff(delta_weight(cat), expected) < 1e-12);
        }
    }
}

TEST_CASE("fold_scaling doubles B when alpha is twice the rank") {
    Rng rng(9);
    LoraAdapter adapter = one_layer_adapter(random_layer(6, 8, 8, rng), 12.0);
    const LoraAdapter folded = fold_scaling(adapter);
    CHECK(folded.alpha == 6.0);
    CHECK(folded.scaling_folded);
    const auto& before = adapter.layers.at("l").b;
    const auto& after = folded.layers.at("l").b;
    for (std::size_t i = 0; i < before.size(); ++i) {
        CHECK(after.data()[i] == 2.0 * before.data()[i]);
    }
}

TEST_CASE("fold_scaling with alpha equal to rank only flips the flag") {
    Rng rng(10);
    LoraAdapter adapter = one_layer_adapter(random_layer(4, 6, 6, rng), 4.0);
    const LoraAdapter folded = fold_scaling(adapter);
    CHECK(folded.scaling_folded);
    CHECK(folded.layers.at("l").b.data() == adapter.layers.at("l").b.data());
}

TEST_CASE("fold_scaling twice is a state error") {
    Rng rng(11);
    const LoraAdapter adapter = one_layer_adapter(random_layer(2, 3, 3, rng), 4.0);
    const LoraAdapter folded = fold_scaling(adapter);
    CHECK_THROWS_AS(fold_scaling(folded), StateError);
}

TEST_CASE("fold_scaling preserves the effective forward map") {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const LoraAdapter adapter = one_layer_adapter(
            random_layer(1 + rng.uniform_below(8), 6, 6, rng), 0.5 + 16.0 * rng.uniform());
        const LoraAdapter folded = fold_scaling(adapter);
        CHECK(folded.scaling() == 1.0);
        CHECK(max_abs_diff(effective_delta(adapter, "l"), effective_delta(folded, "l")) <
              1e-12);
    }
}

TEST_CASE("delta_weight basics") {
    Rng rng(13);
    SUBCASE("zero B gives the zero matrix") {
        LoraLayer layer{random_matrix(3, 4, rng), Matrix(5, 3)};
        const Matrix delta = delta_weight(layer);
        for (const double v : delta.data()) {
            CHECK(v == 0.0);
        }
    }
    SUBCASE("rank-1 delta is the outer product") {
        const LoraLayer layer = random_layer(1, 4, 3, rng);
        const Matrix delta = delta_weight(layer);
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 4; ++j) {
                CHECK(delta(i, j) == doctest::Approx(layer.b(i, 0) * layer.a(0, j)));
            }
        }
    }
    SUBCASE("scale 2 doubles every entry") {
        const LoraLayer layer = random_layer(2, 3, 3, rng);
        const Matrix one = delta_weight(layer);
        const Matrix two = delta_weight(layer, 2.0);
        for (std::size_t i = 0; i < one.size(); ++i) {
            CHECK(two.data()[i] == 2.0 * one.data()[i]);
        }
    }
}
