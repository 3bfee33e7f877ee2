#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "mechdet/error.hpp"
#include "mechdet/projection.hpp"
#include "mechdet/scores.hpp"
#include "mechdet/synth.hpp"
#include "test_util.hpp"

using namespace mechdet;
using testutil::identity_head;
using testutil::random_distribution;

namespace {

// mpmath, 30 digits
constexpr double kJsdHalfVsPoint = 0.215761554338835695579;

// Independent long-double KL-form JSD, written out the textbook way.
long double jsd_oracle(const std::vector<long double>& p, const std::vector<long double>& q) {
    long double a = 0, b = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const long double m = (p[i] + q[i]) / 2;
        if (p[i] > 0) a += p[i] * std::log(p[i] / m);
        if (q[i] > 0) b += q[i] * std::log(q[i] / m);
    }
    return (a + b) / 2;
}

std::vector<long double> softmax_oracle(const std::vector<long double>& z) {
    long double mx = z[0];
    for (auto v : z) mx = std::max(mx, v);
    std::vector<long double> p(z.size());
    long double s = 0;
    for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - mx));
    for (auto& v : p) v /= s;
    return p;
}

ActivationTrace fixture_2222(std::uint64_t seed) {
    SynthShape sh;
    sh.n_layers = 2;
    sh.n_heads = 2;
    sh.n_ctx_chunks = 2;
    sh.n_resp_chunks = 2;
    return make_random_trace(sh, seed, "fixture");
}

}  // namespace

TEST_CASE("jsd examples") {
    CHECK(jsd(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == doctest::Approx(std::numbers::ln2).epsilon(1e-14));
    CHECK(std::abs(jsd(std::vector<double>{1, 0}, std::vector<double>{0, 1}) - std::numbers::ln2) <= 1e-12);
    CHECK(std::abs(jsd(std::vector<double>{0.5, 0.5}, std::vector<double>{1, 0}) - kJsdHalfVsPoint) <= 1e-12);
    CHECK(jsd(std::vector<double>{0.3, 0.7}, std::vector<double>{0.3, 0.7}) == 0.0);
    CHECK_THROWS_AS(jsd(std::vector<double>{1}, std::vector<double>{0.5, 0.5}), InputError);
}

TEST_CASE("jsd properties on random distributions") {
    Rng rng(11);
    for (std::size_t V : {2u, 3u, 10u, 100u, 1000u, 10000u}) {
        for (int rep = 0; rep < 8; ++rep) {
            const auto p = random_distribution(rng, V, rep % 2 ? 0.3 : 0.0);
            const auto q = random_distribution(rng, V, rep % 3 ? 0.0 : 0.5);
            const double a = jsd(p, q);
            const double b = jsd(q, p);
            CHECK(std::abs(a - b) <= 1e-12);
            CHECK(a >= 0.0);
            CHECK(a <= std::numbers::ln2 + 1e-12);
            CHECK(jsd(p, p) <= 1e-15);
            // p != q (random continuous draws) ⇒ strictly positive
            CHECK(a > 1e-9);
            if (V <= 1000) {
                std::vector<long double> pl(p.begin(), p.end()), ql(q.begin(), q.end());
                CHECK(std::abs(a - static_cast<double>(jsd_oracle(pl, ql))) <= 1e-12);
            }
        }
    }
}

TEST_CASE("jsd_from_logits matches jsd of the softmaxes") {
    Rng rng(5);
    std::vector<double> scratch;
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<float> a(257), b(257);
        for (auto& v : a) v = static_cast<float>(rng.normal(0, 4));
        for (auto& v : b) v = static_cast<float>(rng.normal(0, 4));
        const double direct = jsd_from_logits(a, b, scratch);
        CHECK(std::abs(direct - jsd(softmax(a), softmax(b))) <= 1e-13);
    }
    CHECK(jsd_from_logits(std::vector<float>{3, 3}, std::vector<float>{0, 0}, scratch) == 0.0);
}

TEST_CASE("logit lens examples") {
    const auto h = identity_head(2);
    const auto even = logit_lens(std::vector<float>{0, 0}, h);
    CHECK(even[0] == 0.5);
    CHECK(even[1] == 0.5);

    // exact in double precision
    const auto p = logit_lens(std::vector<double>{std::numbers::ln2, 0.0}, h);
    CHECK(std::abs(p[0] - 2.0 / 3.0) <= 1e-12);
    CHECK(std::abs(p[1] - 1.0 / 3.0) <= 1e-12);

    // the f32 path sees float(ln 2); compare against softmax of that exact input
    const float lnf = static_cast<float>(std::numbers::ln2);
    const auto pf = logit_lens(std::vector<float>{lnf, 0.0f}, h);
    CHECK(std::abs(pf[0] - 1.0 / (1.0 + std::exp(-static_cast<double>(lnf)))) <= 1e-15);
    CHECK(std::abs(pf[0] - 2.0 / 3.0) <= 1e-8);

    const auto big = logit_lens(std::vector<float>{1000, 0}, h);
    CHECK(std::isfinite(big[0]));
    CHECK(std::isfinite(big[1]));
    CHECK(big[0] == doctest::Approx(1.0));
    CHECK(big[1] <= 1e-300);
    CHECK(std::abs(big[0] + big[1] - 1.0) <= 1e-6);

    CHECK_THROWS_AS(logit_lens(std::vector<float>{1, 2, 3}, h), InputError);
}

TEST_CASE("logit lens normalization over random states") {
    Rng rng(3);
    const auto heads = {make_random_head(32, 1000, NormKind::none, 1), make_random_head(32, 1000, NormKind::rms, 2),
                        make_random_head(32, 1000, NormKind::layernorm, 3)};
    for (const auto& head : heads) {
        std::vector<float> x(32);
        for (int rep = 0; rep < 1000 / 3 + 1; ++rep) {
            for (auto& v : x) v = static_cast<float>(rng.uniform(-1e4, 1e4));
            const auto p = logit_lens(x, head);
            const double s = std::accumulate(p.begin(), p.end(), 0.0);
            CHECK(std::abs(s - 1.0) <= 1e-6);
            for (double v : p) REQUIRE(std::isfinite(v));
            if (head.norm_kind != NormKind::none) {
                // normalized state is bounded, so nothing underflows
                CHECK(*std::min_element(p.begin(), p.end()) > 0.0);
            }
        }
    }
}

TEST_CASE("logit lens f32 and f64 paths agree") {
    Rng rng(9);
    const auto head = make_random_head(24, 300, NormKind::rms, 4);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<float> xf(24);
        for (auto& v : xf) v = static_cast<float>(rng.normal(0, 5));
        const std::vector<double> xd(xf.begin(), xf.end());
        const auto a = logit_lens(xf, head);
        const auto b = logit_lens(xd, head);
        for (std::size_t v = 0; v < a.size(); ++v) CHECK(std::abs(a[v] - b[v]) <= 1e-6);
    }
}

TEST_CASE("project_logits is batch invariant") {
    Rng rng(21);
    const auto head = make_random_head(37, 131, NormKind::none, 6);
    const std::size_t n = 11;
    std::vector<float> states(n * 37);
    for (auto& v : states) v = static_cast<float>(rng.normal());
    std::vector<float> batch(n * 131);
    project_logits(states, n, head, batch);
    for (std::size_t s = 0; s < n; ++s) {
        std::vector<float> one(131);
        project_logits({states.data() + s * 37, 37}, 1, head, one);
        for (std::size_t v = 0; v < 131; ++v) REQUIRE(one[v] == batch[s * 131 + v]);
        // and close to the plain double dot product
        for (std::size_t v = 0; v < 131; ++v) {
            double z = 0;
            for (std::size_t k = 0; k < 37; ++k) z += static_cast<double>(states[s * 37 + k]) * head.row(v)[k];
            CHECK(std::abs(one[v] - z) <= 1e-4 * (1 + std::abs(z)));
        }
    }
}

TEST_CASE("aggregate attention") {
    auto t = testutil::minimal_trace();
    // 2 response tokens x 2 context tokens, one chunk each
    t.meta.token_to_span = {0, 0};
    t.meta.ctx_token_to_span = {0, 0};
    t.attention = {{1, 1, 2, 2}, {0.25f, 0.25f, 0.25f, 0.25f}, DType::f32};
    CHECK(aggregate_attention(t).values == std::vector<float>{0.25f});
    t.attention.values = {0.1f, 0.3f, 0.2f, 0.4f};
    CHECK(aggregate_attention(t).values[0] == static_cast<float>((0.1f + 0.3f + 0.2f + 0.4f) / 4.0));
    CHECK(std::abs(aggregate_attention(t).values[0] - 0.25) <= 1e-7);
    CHECK(aggregate_attention(t, AggregationRule::max).values[0] == 0.4f);
    CHECK(std::abs(aggregate_attention(t, AggregationRule::sum).values[0] - 1.0) <= 1e-6);

    // chunk granularity passes through
    auto c = fixture_2222(1);
    auto pre = pre_aggregate(c);
    CHECK(aggregate_attention(pre).values == pre.attention.values);

    t.meta.token_to_span = {0, 3};
    CHECK_THROWS_WITH_AS(aggregate_attention(t), doctest::Contains("SPAN_INDEX_RANGE"), InputError);
    CHECK(parse_aggregation("max") == AggregationRule::max);
    CHECK_THROWS_AS(parse_aggregation("median"), InputError);
}

TEST_CASE("context chunk selection") {
    CHECK(argmax_lowest(std::vector<float>{0.1f, 0.7f, 0.2f}) == 1);
    CHECK(argmax_lowest(std::vector<float>{0.5f, 0.5f}) == 0);
    CHECK(argmax_lowest(std::vector<float>{0.0f}) == 0);

    Rng rng(8);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<float> row(1 + rng.index(9));
        for (auto& v : row) v = static_cast<float>(rng.index(4)) / 4.0f;  // plenty of ties
        const auto k = argmax_lowest(row);
        for (float a : {0.5f, 2.0f, 4.0f, 1024.0f}) {  // powers of two scale exactly
            auto r = row;
            for (auto& v : r) v *= a;
            CHECK(argmax_lowest(r) == k);
        }
        const float a = static_cast<float>(rng.uniform(1e-3, 1e3));
        auto r = row;
        for (auto& v : r) v *= a;
        CHECK(argmax_lowest(r) == k);
    }
}

TEST_CASE("cosine and ECS examples") {
    CHECK(cosine_similarity(std::vector<float>{1, 2}, std::vector<float>{1, 2}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_similarity(std::vector<float>{1, 0}, std::vector<float>{0, 3}) == 0.0);
    CHECK(std::abs(cosine_similarity(std::vector<float>{1, 0}, std::vector<float>{1, 1}) - 0.70710678118654752) <=
          1e-15);
    CHECK(cosine_similarity(std::vector<float>{0, 0}, std::vector<float>{1, 1}) == 0.0);

    auto t = testutil::minimal_trace();
    auto ecs = external_context_score(t);
    REQUIRE(ecs.size() == 1);
    // the 8-digit literal 0.70710678 is itself 1.19e-9 off; check against sqrt(2)/2
    CHECK(std::abs(ecs[0] - 0.70710678) <= 2e-9);
    CHECK(std::abs(ecs[0] - std::numbers::sqrt2 / 2) <= 1e-15);
    t.resp_emb.values = {1, 1};
    CHECK(external_context_score(t)[0] == doctest::Approx(1.0).epsilon(1e-15));
    t.resp_emb.values = {1, -1};
    CHECK(std::abs(external_context_score(t)[0]) <= 1e-15);
    t.resp_emb.values = {0, 0};
    CHECK(external_context_score(t)[0] == 0.0);

    t.ctx_emb = {};
    CHECK_THROWS_WITH_AS(external_context_score(t), doctest::Contains("MISSING_EMBEDDINGS"), InputError);
}

TEST_CASE("ECS uses the argmax context chunk per head") {
    auto t = pre_aggregate(fixture_2222(4));
    // force head (0,0) row for j=0 to pick chunk 1, head (0,1) to pick chunk 0
    auto& a = t.attention.values;  // [L][H][J][M]
    a[0] = 0.1f, a[1] = 0.9f;
    a[4] = 0.8f, a[5] = 0.2f;
    const auto ecs = external_context_score(t);
    auto cos = [&](int j, int i) {
        return cosine_similarity({t.resp_emb.values.data() + j * 8, 8}, {t.ctx_emb.values.data() + i * 8, 8});
    };
    CHECK(ecs[0] == cos(0, 1));
    CHECK(ecs[2] == cos(0, 0));
}

TEST_CASE("PKS examples") {
    SUBCASE("identical residuals give zero") {
        auto t = fixture_2222(2);
        t.x_post = t.x_mid;
        const auto head = make_random_head(16, 64, NormKind::rms, 1);
        const auto r = parametric_knowledge_score(t, head);
        for (double v : r.chunk_pks) CHECK(v == 0.0);
        for (double v : r.token_pks) CHECK(v == 0.0);
    }
    SUBCASE("single token chunk and two-token mean against a scalar oracle") {
        auto t = testutil::minimal_trace();
        t.meta.d_model = 4;
        t.meta.vocab_size = 4;
        t.meta.response_text = "Aa. Bb.";
        t.meta.response_spans = {{0, 3}, {4, 7}};
        t.meta.token_to_span = {0, 1, 1};
        t.attention = {{1, 1, 3, 1}, {0.5f, 0.5f, 0.5f}, DType::f32};
        t.x_mid = {{1, 3, 4}, {0.5f, -1.0f, 2.0f, 0.25f, 1.5f, 0.0f, -0.75f, 3.0f, -2.0f, 1.0f, 0.125f, 0.5f}, DType::f32};
        t.x_post = {{1, 3, 4}, {1.5f, 0.0f, 2.0f, -1.0f, 0.5f, 0.5f, 0.5f, 0.5f, 3.0f, -1.0f, 0.0f, 2.25f}, DType::f32};
        t.resp_emb = {{2, 2}, {1, 0, 0, 1}, DType::f32};
        REQUIRE(validate_trace(t).ok());
        const auto head = identity_head(4);

        std::vector<double> token(3);
        for (int k = 0; k < 3; ++k) {
            std::vector<long double> zm(4), zp(4);
            for (int i = 0; i < 4; ++i) zm[i] = t.x_mid.values[k * 4 + i], zp[i] = t.x_post.values[k * 4 + i];
            token[k] = static_cast<double>(jsd_oracle(softmax_oracle(zm), softmax_oracle(zp)));
        }
        const auto r = parametric_knowledge_score(t, head);
        for (int k = 0; k < 3; ++k) CHECK(std::abs(r.token_pks[k] - token[k]) <= 1e-12);
        CHECK(r.chunk_pks[0] == r.token_pks[0]);
        CHECK(std::abs(r.chunk_pks[1] - (token[1] + token[2]) / 2) <= 1e-12);
        CHECK(r.empty_chunk == std::vector<std::uint8_t>{0, 0});
    }
    SUBCASE("empty chunk flagged and scored 0") {
        auto t = testutil::minimal_trace();
        t.meta.response_text = "Aa. Bb.";
        t.meta.response_spans = {{0, 3}, {4, 7}};
        t.resp_emb = {{2, 2}, {1, 0, 0, 1}, DType::f32};
        const auto r = parametric_knowledge_score(t, identity_head(2));
        CHECK(r.empty_chunk == std::vector<std::uint8_t>{0, 1});
        CHECK(r.chunk_pks[1] == 0.0);
        CHECK(r.chunk_pks[0] > 0.0);
    }
    SUBCASE("head mismatch") {
        auto t = testutil::minimal_trace();
        CHECK_THROWS_WITH_AS(parametric_knowledge_score(t, identity_head(3)), doctest::Contains("D_MODEL_MISMATCH"),
                             InputError);
    }
}

TEST_CASE("score_trace contract") {
    const auto t = fixture_2222(7);
    const auto head = make_random_head(16, 64, NormKind::rms, 7);
    const auto a = score_trace(t, head);
    CHECK(a.ecs.size() == 8);
    CHECK(a.pks.size() == 4);
    CHECK(a.n_layers == 2);
    CHECK(a.n_heads == 2);
    CHECK(a.n_chunks == 2);
    const auto b = score_trace(t, head);
    CHECK(a == b);
    for (double v : a.ecs) CHECK((v >= -1.0 && v <= 1.0));
    for (double v : a.pks) CHECK((v >= 0.0 && v <= std::numbers::ln2 + 1e-9));

    auto same = t;
    same.x_post = same.x_mid;
    same.resp_emb = same.ctx_emb;  // M = J = 2
    // make every head attend to the matching chunk so resp_emb[j] meets ctx_emb[j]
    same = pre_aggregate(same);
    auto& a4 = same.attention.values;
    for (std::size_t lh = 0; lh < 4; ++lh) {
        a4[lh * 4 + 0] = 0.9f, a4[lh * 4 + 1] = 0.1f;
        a4[lh * 4 + 2] = 0.1f, a4[lh * 4 + 3] = 0.9f;
    }
    const auto s = score_trace(same, head);
    for (double v : s.pks) CHECK(v == 0.0);
    for (double v : s.ecs) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("aggregation path equivalence") {
    const auto head = make_random_head(16, 64, NormKind::layernorm, 12);
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        SynthShape sh;
        sh.n_ctx_chunks = 1 + static_cast<std::int64_t>(seed % 4);
        sh.n_resp_chunks = 1 + static_cast<std::int64_t>(seed % 3);
        const auto tok = make_random_trace(sh, seed);
        const auto chk = pre_aggregate(tok);
        REQUIRE(validate_trace(chk).ok());
        const auto a = score_trace(tok, head);
        const auto b = score_trace(chk, head);
        REQUIRE(a.ecs.size() == b.ecs.size());
        for (std::size_t k = 0; k < a.ecs.size(); ++k) CHECK(std::abs(a.ecs[k] - b.ecs[k]) <= 1e-6);
        for (std::size_t k = 0; k < a.pks.size(); ++k) CHECK(std::abs(a.pks[k] - b.pks[k]) <= 1e-6);
    }
}

TEST_CASE("parallel scoring is bitwise identical") {
    SynthShape sh;
    sh.n_layers = 5;
    sh.d_model = 40;
    sh.vocab_size = 203;
    sh.n_resp_chunks = 6;
    sh.max_tokens_per_chunk = 9;
    const auto t = make_random_trace(sh, 99);
    const auto head = make_random_head(40, 203, NormKind::rms, 99);
    const auto ref = score_trace(t, head, {.jobs = 1, .token_block = 32});
    for (unsigned jobs : {1u, 2u, 3u, 8u}) {
        for (std::size_t block : {1u, 3u, 7u, 32u, 1000u}) {
            const auto got = score_trace(t, head, {.jobs = jobs, .token_block = block});
            CHECK(got == ref);
        }
    }
}

TEST_CASE("f16 storage scores stay in range") {
    SynthShape sh;
    sh.storage = DType::f16;
    const auto t = make_random_trace(sh, 17);
    REQUIRE(validate_trace(t).ok());
    const auto s = score_trace(t, make_random_head(16, 64, NormKind::rms, 1));
    for (double v : s.ecs) CHECK((v >= -1.0 && v <= 1.0));
    for (double v : s.pks) CHECK((v >= 0.0 && v <= std::numbers::ln2 + 1e-9));
}
