#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <set>
#include <sstream>

#include "chaosmab/harness.hpp"

using namespace chaosmab;
using Catch::Approx;

namespace {

ExperimentConfig small_config(std::vector<std::vector<double>> envs, std::uint64_t n_max, std::uint64_t l_m)
{
    ExperimentConfig cfg;
    cfg.k = envs.front().size();
    cfg.n_max = n_max;
    cfg.l_m = l_m;
    cfg.envs.source = EnvSourceKind::explicit_list;
    cfg.envs.list = std::move(envs);
    cfg.master_seed = 2024;
    return cfg;
}

}  // namespace

TEST_CASE("one round-robin cycle pulls every arm once", "[harness][measurement]")
{
    auto cfg = small_config({{0.9, 0.8, 0.7, 0.6}}, 4, 1);
    cfg.checkpoint_stride = 1;
    const auto envs = build_environments(cfg);
    const auto s = run_measurement(cfg, envs[0], 0, PolicyKind::round_robin, 0, nullptr);
    CHECK(s.checkpoints == std::vector<std::uint64_t>{1, 2, 3, 4});
    CHECK(s.pulls_at.back() == std::vector<std::uint64_t>{1, 1, 1, 1});
}

TEST_CASE("every policy conserves pulls and is repeatable", "[harness][measurement]")
{
    auto cfg = small_config({{0.2, 0.5, 0.3, 0.8, 0.1, 0.6, 0.4, 0.7}}, 3000, 1);
    cfg.checkpoint_stride = 250;
    const auto envs = build_environments(cfg);
    const auto signal = build_signal(cfg);
    REQUIRE(signal.has_value());
    for (PolicyKind p : kAllPolicies) {
        const auto a = run_measurement(cfg, envs[0], 0, p, 3, &*signal);
        const auto b = run_measurement(cfg, envs[0], 0, p, 3, &*signal);
        CHECK(a == b);
        for (std::size_t c = 0; c < a.size(); ++c) {
            const auto total = std::accumulate(a.pulls_at[c].begin(), a.pulls_at[c].end(), std::uint64_t{0});
            REQUIRE(total == a.checkpoints[c]);
            REQUIRE(a.reward_at[c] <= static_cast<double>(a.checkpoints[c]));
            if (c > 0) {
                REQUIRE(a.reward_at[c] >= a.reward_at[c - 1]);
                REQUIRE(a.regret_at[c] >= a.regret_at[c - 1]);
            }
        }
        const auto other = run_measurement(cfg, envs[0], 0, p, 4, &*signal);
        if (p != PolicyKind::round_robin) CHECK(other.pulls_at.back() != a.pulls_at.back());
    }
}

TEST_CASE("round-robin regret is exact", "[harness]")
{
    const auto cfg = small_config({{0.9, 0.8, 0.7, 0.6}}, 10000, 3);
    const auto envs = build_environments(cfg);
    const auto s = run_measurement(cfg, envs[0], 0, PolicyKind::round_robin, 0, nullptr);
    CHECK(s.regret_at.back() == Approx(1500.0).epsilon(1e-12));
    // linear between full cycles: 100 steps = 25 cycles = 25 * 0.6
    for (std::size_t c = 1; c + 1 < s.size(); ++c) CHECK(s.regret_at[c + 1] - s.regret_at[c] == Approx(15.0));
}

TEST_CASE("a single measurement ensemble is that measurement", "[harness][ensemble]")
{
    auto cfg = small_config({{0.4, 0.3, 0.2, 0.1}}, 500, 1);
    cfg.checkpoint_stride = 50;
    const auto envs = build_environments(cfg);
    const auto signal = build_signal(cfg);
    const auto r = run_ensemble(cfg, envs, &*signal);
    for (std::size_t p = 0; p < cfg.policies.size(); ++p) {
        const auto s = run_measurement(cfg, envs[0], 0, cfg.policies[p], 0, &*signal);
        const auto& c = r.curve(0, p);
        CHECK(c.mean_regret == s.regret_at);
        CHECK(c.mean_reward == s.reward_at);
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(c.mean_cor[i] == s.cor_at[i]);
            for (std::size_t a = 0; a < cfg.k; ++a) CHECK(c.mean_pulls[i][a] == static_cast<double>(s.pulls_at[i][a]));
        }
    }
    CHECK_FALSE(r.summary.front().var_cor.has_value());
    CHECK_THROWS_AS(variance_table(r), std::invalid_argument);
}

TEST_CASE("ensembles do not depend on the thread count", "[harness][ensemble]")
{
    auto cfg = small_config({{0.9, 0.8, 0.7, 0.6}, {0.1, 0.4, 0.3, 0.2}, {0.5, 0.6, 0.8, 0.7}}, 1000, 4);
    const auto envs = build_environments(cfg);
    const auto signal = build_signal(cfg);
    const auto serial = run_ensemble(cfg, envs, &*signal, 1);
    const auto threaded = run_ensemble(cfg, envs, &*signal, 5);
    CHECK(serial.curves == threaded.curves);
    std::ostringstream a, b;
    write_curves_csv(a, serial);
    write_curves_csv(b, threaded);
    CHECK(a.str() == b.str());
}

TEST_CASE("ensemble means are monotone and variances match a direct computation", "[harness][ensemble]")
{
    auto cfg = small_config({{0.9, 0.8, 0.7, 0.6}, {0.1, 0.4, 0.3, 0.2}, {0.5, 0.6, 0.8, 0.7}}, 2000, 3);
    const auto envs = build_environments(cfg);
    const auto signal = build_signal(cfg);
    const auto r = run_ensemble(cfg, envs, &*signal);
    for (const auto& c : r.curves) {
        for (std::size_t i = 1; i < c.mean_regret.size(); ++i) REQUIRE(c.mean_regret[i] >= c.mean_regret[i - 1]);
    }
    const auto table = variance_table(r);
    REQUIRE(table.size() == cfg.policies.size());
    for (std::size_t p = 0; p < table.size(); ++p) {
        std::vector<double> cors, rewards;
        for (std::size_t e = 0; e < envs.size(); ++e) {
            cors.push_back(r.curve(e, p).final_cor());
            rewards.push_back(r.curve(e, p).final_reward() / (envs[e].best_mean() * 2000.0));
        }
        CHECK(table[p].var_cor == Approx(sample_variance(cors)));
        CHECK(table[p].var_reward_norm == Approx(sample_variance(rewards)));
    }
    CHECK(r.summary_for(PolicyKind::chaos).var_cor == table[r.policy_index(PolicyKind::chaos)].var_cor);
}

TEST_CASE("sample variance", "[harness]")
{
    CHECK(sample_variance({0.0, 1.0}) == 0.5);
    CHECK(sample_variance({0.3, 0.3, 0.3}) == 0.0);
    CHECK(sample_variance({1.0, 2.0, 3.0, 4.0}) == Approx(5.0 / 3.0));
    CHECK_THROWS_AS(sample_variance({1.0}), std::invalid_argument);
}

TEST_CASE("measurement seeds and signal offsets separate the runs", "[harness]")
{
    std::set<std::uint64_t> seeds;
    for (std::size_t e = 0; e < 20; ++e)
        for (PolicyKind p : kAllPolicies)
            for (std::uint64_t id = 0; id < 50; ++id) seeds.insert(measurement_seed(7, e, p, id));
    CHECK(seeds.size() == 20 * 4 * 50);

    auto cfg = small_config({{0.9, 0.8, 0.7, 0.6}}, 100, 10);
    const SignalSource signal = gen_synthetic(SyntheticKind::uniform_iid, 100000, 1);
    CHECK(signal_offset(cfg, signal, 0) == 0);
    CHECK(signal_offset(cfg, signal, 1) == 200);  // n_max * delta_s, delta_s = M = 2
    CHECK(signal_offset(cfg, signal, 1000) == 200000 % 100000);
}

TEST_CASE("automatic signal length covers the ensemble", "[harness]")
{
    auto cfg = small_config({{0.9, 0.8, 0.7, 0.6}}, 1000, 10);
    const auto s = build_signal(cfg);
    REQUIRE(s.has_value());
    CHECK(s->length() >= 10 * 1000 * 2);

    cfg.policies = {PolicyKind::round_robin, PolicyKind::ucb1};
    CHECK_FALSE(build_signal(cfg).has_value());
}

TEST_CASE("configuration errors", "[harness][errors]")
{
    SECTION("signal-driven policy without a recorded trace")
    {
        auto cfg = small_config({{0.9, 0.8, 0.7, 0.6}}, 100, 1);
        cfg.signal.kind = SignalKind::recorded;
        cfg.signal.path = "/nonexistent/trace.txt";
        CHECK_THROWS_AS(build_signal(cfg), ConfigError);
        cfg.signal.path.clear();
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SECTION("short trace without wrap-around")
    {
        auto cfg = small_config({{0.9, 0.8, 0.7, 0.6}}, 100, 2);
        cfg.signal.allow_wrap = false;
        const SignalSource tiny = gen_synthetic(SyntheticKind::uniform_iid, 150, 1);
        const auto envs = build_environments(cfg);
        CHECK_THROWS_AS(run_measurement(cfg, envs[0], 0, PolicyKind::chaos, 0, &tiny), ConfigError);
        const SignalSource enough = gen_synthetic(SyntheticKind::uniform_iid, 400, 1);
        CHECK_NOTHROW(run_measurement(cfg, envs[0], 0, PolicyKind::chaos, 0, &enough));
        CHECK_NOTHROW(run_measurement(cfg, envs[0], 0, PolicyKind::chaos, 1, &enough));
        CHECK_THROWS_AS(run_measurement(cfg, envs[0], 0, PolicyKind::chaos, 2, &enough), ConfigError);
    }
    SECTION("no signal at all")
    {
        auto cfg = small_config({{0.9, 0.8, 0.7, 0.6}}, 100, 1);
        const auto envs = build_environments(cfg);
        CHECK_THROWS_AS(run_ensemble(cfg, envs, nullptr), ConfigError);
        CHECK_THROWS_AS(run_measurement(cfg, envs[0], 0, PolicyKind::chaos_ci, 0, nullptr), ConfigError);
    }
    SECTION("bad environments")
    {
        auto cfg = small_config({{0.9, 0.8, 0.7}}, 100, 1);
        cfg.k = 4;
        CHECK_THROWS_AS(build_environments(cfg), ConfigError);
        cfg.envs.list = {{0.9, 0.8, 0.7, 0.0}};
        CHECK_THROWS_AS(build_environments(cfg), ConfigError);
        cfg.envs.list = {{0.9, 0.8, 0.8, 0.1}};
        CHECK_THROWS_AS(build_environments(cfg), ConfigError);
        cfg.envs.source = EnvSourceKind::enumerated;
        cfg.envs.gap = 0.05;
        CHECK_THROWS_AS(build_environments(cfg), ConfigError);
        CHECK_THROWS_AS(run_ensemble(cfg, {}, nullptr), ConfigError);
    }
    SECTION("bad parameters")
    {
        auto cfg = small_config({{0.9, 0.8, 0.7, 0.6}}, 100, 1);
        cfg.k = 6;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg.k = 4;
        cfg.l_m = 0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg.l_m = 1;
        cfg.ci.beta = 1.0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg.ci.beta = 1.5;
        cfg.chaos.alpha = 1.0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
}

TEST_CASE("CSV outputs", "[harness][csv]")
{
    auto cfg = small_config({{0.9, 0.8, 0.7, 0.6}, {0.6, 0.7, 0.8, 0.9}}, 200, 2);
    cfg.policies = {PolicyKind::round_robin, PolicyKind::ucb1};
    const auto envs = build_environments(cfg);
    const auto r = run_ensemble(cfg, envs, nullptr);

    std::ostringstream curves, scatter, variance;
    write_curves_csv(curves, r);
    write_scatter_csv(scatter, r);
    write_variance_csv(variance, r);

    std::istringstream lines(curves.str());
    std::string header;
    std::getline(lines, header);
    CHECK(header == "env_id,policy,step,mean_reward,mean_regret,mean_cor,mean_t_0,mean_t_1,mean_t_2,mean_t_3");
    std::size_t rows = 0;
    for (std::string line; std::getline(lines, line);) ++rows;
    CHECK(rows == 2 * 2 * 3);  // checkpoints 1, 100, 200

    CHECK(scatter.str().rfind("env_id,policy,reward_norm,cor\n0,round_robin,", 0) == 0);
    CHECK(variance.str().rfind("policy,var_cor,var_reward_norm\nround_robin,", 0) == 0);
}
