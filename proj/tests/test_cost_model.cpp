#include "splitfed/cost_model.hpp"
#include "splitfed/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace splitfed;
using namespace splitfed::cost;

namespace {

ScenarioParams make(std::uint64_t k, std::uint64_t n, std::uint64_t p, std::uint64_t q,
                    ClientFraction eta, std::uint64_t epochs = 1)
{
    ScenarioParams s;
    s.clients = k;
    s.model_params = n;
    s.dataset_size = p;
    s.smashed_size = q;
    s.client_fraction = eta;
    s.epochs = epochs;
    return s;
}

// Per-client summation, independent of the closed forms under test.
std::uint64_t oracle_split_total(const ScenarioParams& s, bool sync)
{
    std::uint64_t total = 0;
    for (std::uint64_t k = 0; k < s.clients; ++k) {
        const std::uint64_t records = s.dataset_size / s.clients;
        total += records * s.smashed_size;   // activations up
        total += records * s.smashed_size;   // gradients down
        if (sync)
            total += s.client_fraction.numerator() * s.model_params / s.client_fraction.denominator();
    }
    return total * s.epochs;
}

// Random scenario with equal shards and an exact fraction.
ScenarioParams random_exact(std::mt19937_64& rng)
{
    std::uniform_int_distribution<std::uint64_t> small(1, 50);
    const std::uint64_t k = small(rng);
    const std::uint64_t n = small(rng) * 100;
    std::uniform_int_distribution<std::uint64_t> client(0, n);
    return make(k, n, k * small(rng), small(rng), ClientFraction::exact(client(rng), n));
}

} // namespace

TEST_CASE("split_comm_sync matches the per-client table")
{
    SUBCASE("golden [4,3,2] cut at layer 1")
    {
        const auto r = split_comm_sync(make(2, 23, 6, 3, ClientFraction::exact(15, 23)));
        CHECK(r.method == Method::SplitSync);
        CHECK(r.per_client_scalars == 33);
        CHECK(r.total_scalars == 66);
        CHECK(r.per_client_bytes == 132);
        CHECK(r.total_bytes == 264);
    }
    SUBCASE("zero data leaves only weight hand-over")
    {
        for (std::uint64_t k : {1, 2, 7}) {
            const auto r = split_comm_sync(make(k, 10, 0, 4, ClientFraction::real(0.5)));
            CHECK(r.per_client_scalars == 5);
            CHECK(r.total_scalars == 5 * k);
        }
    }
    SUBCASE("point on the break-even locus")
    {
        const auto s = make(10, 2000, 1000, 10, ClientFraction::real(1.0));
        CHECK(split_comm_sync(s).total_scalars == 40000);
        CHECK(federated_comm(s).total_scalars == 40000);
    }
    SUBCASE("random scenarios agree with per-client summation")
    {
        std::mt19937_64 rng(7);
        for (int i = 0; i < 200; ++i) {
            auto s = random_exact(rng);
            s.epochs = 1 + i % 3;
            CHECK(split_comm_sync(s).total_scalars == oracle_split_total(s, true));
            CHECK(split_comm_nosync(s).total_scalars == oracle_split_total(s, false));
        }
    }
}

TEST_CASE("strict shards reject remainders, lenient shards absorb them")
{
    auto s = make(2, 23, 7, 3, ClientFraction::exact(15, 23));
    CHECK_THROWS_AS(split_comm_sync(s), DivisibilityError);
    CHECK_THROWS_AS(split_comm_nosync(s), DivisibilityError);
    CHECK_NOTHROW(federated_comm(s));

    s.shards = ShardPolicy::Lenient;
    const auto sync = split_comm_sync(s);
    CHECK(sync.total_scalars == 2 * 7 * 3 + 15 * 2);
    CHECK(sync.per_client_scalars == 2 * 4 * 3 + 15);
    CHECK(split_comm_nosync(s).total_scalars == 2 * 7 * 3);
    CHECK(s.shard_sizes() == std::vector<std::uint64_t>{4, 3});
}

TEST_CASE("split_comm_nosync")
{
    CHECK(split_comm_nosync(make(2, 23, 6, 3, ClientFraction::real(0.2))).per_client_scalars == 18);
    CHECK(split_comm_nosync(make(2, 23, 6, 3, ClientFraction::real(0.2))).total_scalars == 36);
    CHECK(split_comm_nosync(make(3, 23, 0, 3, ClientFraction::real(0.2))).total_scalars == 0);
    const auto single = split_comm_nosync(make(1, 9, 100, 5, ClientFraction::real(0.2)));
    CHECK(single.per_client_scalars == 1000);
    CHECK(single.total_scalars == 1000);
}

TEST_CASE("federated_comm")
{
    const ClientFraction eta = ClientFraction::real(0.5);
    CHECK(federated_comm(make(3, 10, 0, 1, eta)).per_client_scalars == 20);
    CHECK(federated_comm(make(3, 10, 0, 1, eta)).total_scalars == 60);
    CHECK(federated_comm(make(1, 1, 0, 1, eta)).total_scalars == 2);
    CHECK(federated_comm(make(2, 23, 0, 1, eta, 5)).total_scalars == 460);
}

TEST_CASE("label accounting is opt-in")
{
    auto s = make(2, 23, 6, 3, ClientFraction::exact(15, 23));
    s.label_width = 2;
    const auto without = split_comm_sync(s);
    s.include_labels = true;
    const auto with = split_comm_sync(s);
    CHECK(with.total_scalars - without.total_scalars == 6 * 2);
    CHECK(with.per_client_scalars - without.per_client_scalars == 3 * 2);
    CHECK(federated_comm(s).total_scalars == 2 * 2 * 23);
}

TEST_CASE("batch-level sync adds one hand-over per batch")
{
    auto s = make(2, 23, 6, 3, ClientFraction::exact(15, 23));
    CHECK(split_comm_sync_batch(s).total_scalars == 36 + 15 * 6);
    s.batch_size = 2;
    CHECK(split_comm_sync_batch(s).total_scalars == 36 + 15 * 4);
    s.batch_size = 3;
    CHECK(split_comm_sync_batch(s).total_scalars == split_comm_sync(s).total_scalars);
}

TEST_CASE("efficiency_ratio examples")
{
    SUBCASE("large model, many clients, sizable data")
    {
        const auto e = efficiency_ratio(make(100, 1'000'000, 100'000, 1000, ClientFraction::real(0.2)),
                                        Method::SplitSync);
        CHECK(e.rho == doctest::Approx(10.0 / 11.0).epsilon(1e-15));
        CHECK(e.winner == Winner::Federated);
    }
    SUBCASE("zero data")
    {
        const auto e = efficiency_ratio(make(3, 10, 0, 4, ClientFraction::real(0.5)), Method::SplitSync);
        CHECK(e.rho == 4.0);
        CHECK(e.winner == Winner::Split);
    }
    SUBCASE("break-even point is a tie")
    {
        const auto e = efficiency_ratio(make(10, 2000, 1000, 10, ClientFraction::real(1.0)),
                                        Method::SplitSync);
        CHECK(e.rho == 1.0);
        CHECK(e.winner == Winner::Tie);
    }
    SUBCASE("undefined ratio reports split with an infinite sentinel")
    {
        const auto sync = efficiency_ratio(make(3, 10, 0, 4, ClientFraction::real(0.0)), Method::SplitSync);
        CHECK(std::isinf(sync.rho));
        CHECK_FALSE(sync.defined);
        CHECK(sync.winner == Winner::Split);
        const auto nosync =
            efficiency_ratio(make(3, 10, 0, 4, ClientFraction::real(0.5)), Method::SplitNoSync);
        CHECK(std::isinf(nosync.rho));
        CHECK(nosync.winner == Winner::Split);
    }
    SUBCASE("federated is not a split method")
    {
        CHECK_THROWS_AS(efficiency_ratio(make(1, 1, 1, 1, ClientFraction::real(0.5)), Method::Federated),
                        InvalidParam);
    }
}

TEST_CASE("tie band is 1e-12 around one")
{
    CHECK(classify(1.0 + 5e-13) == Winner::Tie);
    CHECK(classify(1.0 - 5e-13) == Winner::Tie);
    CHECK(classify(1.0 + 1e-11) == Winner::Split);
    CHECK(classify(1.0 - 1e-11) == Winner::Federated);
}

TEST_CASE("efficiency properties on random exact scenarios")
{
    std::mt19937_64 rng(11);
    for (int i = 0; i < 500; ++i) {
        const auto s = random_exact(rng);
        for (const Method m : {Method::SplitSync, Method::SplitNoSync}) {
            const auto e = efficiency_ratio(s, m);
            const auto split = comm_for(s, m).total_scalars;
            const auto fed = federated_comm(s).total_scalars;
            CHECK((e.rho > 1.0) == (fed > split));
            CHECK((e.rho < 1.0) == (fed < split));

            auto scaled = s;
            scaled.epochs = 7;
            scaled.bytes_per_scalar = 2;
            CHECK(efficiency_ratio(scaled, m).rho == e.rho);
        }
        const auto sync = split_comm_sync(s).total_scalars;
        const auto nosync = split_comm_nosync(s).total_scalars;
        CHECK(sync >= nosync);
        CHECK((sync == nosync) == (s.client_fraction.numerator() == 0));
    }
}

TEST_CASE("rho is monotone in K, N, p and q")
{
    const auto eta = ClientFraction::real(0.25);
    for (const Method m : {Method::SplitSync, Method::SplitNoSync}) {
        for (std::uint64_t k : {1, 4, 16})
            for (std::uint64_t n : {1000, 100000})
                for (std::uint64_t p : {64, 6400})
                    for (std::uint64_t q : {1, 8}) {
                        const double base = efficiency_ratio(make(k, n, p, q, eta), m).rho;
                        CHECK(efficiency_ratio(make(k + 1, n, p, q, eta), m).rho > base);
                        CHECK(efficiency_ratio(make(k, n + 1, p, q, eta), m).rho > base);
                        CHECK(efficiency_ratio(make(k, n, p + 1, q, eta), m).rho < base);
                        CHECK(efficiency_ratio(make(k, n, p, q + 1, eta), m).rho < base);
                    }
    }
}

TEST_CASE("break_even_model_size")
{
    CHECK(break_even_model_size(1000, 10, 10, ClientFraction::real(1.0), Method::SplitSync) == 2000.0);
    CHECK(break_even_model_size(1000, 10, 10, ClientFraction::real(0.3), Method::SplitNoSync) == 1000.0);
    CHECK(break_even_model_size(1000, 10, 10, ClientFraction::real(0.0), Method::SplitSync) ==
          break_even_model_size(1000, 10, 10, ClientFraction::real(0.0), Method::SplitNoSync));
    CHECK_THROWS_AS(break_even_model_size(0, 10, 10, ClientFraction::real(1.0), Method::SplitSync),
                    InvalidParam);
    CHECK_THROWS_AS(break_even_model_size(10, 0, 10, ClientFraction::real(1.0), Method::SplitSync),
                    InvalidParam);

    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::uint64_t> count(1, 1'000'000);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const auto p = count(rng), q = count(rng) % 4096 + 1, k = count(rng);
        const auto eta = ClientFraction::real(unit(rng));
        for (const Method m : {Method::SplitSync, Method::SplitNoSync}) {
            const double n = break_even_model_size(p, q, k, eta, m);
            const auto e = efficiency_ratio_at(n, p, q, k, eta, m);
            CHECK(std::fabs(e.rho - 1.0) <= 1e-12);
            CHECK(e.winner == Winner::Tie);
        }
    }
}

TEST_CASE("break-even curve is a decreasing hyperbola")
{
    const auto curve = break_even_curve(1000, 10, ClientFraction::real(1.0), {1, 10, 100}, Method::SplitSync);
    REQUIRE(curve.points.size() == 3);
    CHECK(curve.points[0].second == 20000.0);
    CHECK(curve.points[1].second == 2000.0);
    CHECK(curve.points[2].second == 200.0);

    const auto doubled = break_even_curve(1000, 20, ClientFraction::real(1.0), {1, 10, 100}, Method::SplitSync);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(doubled.points[i].second == 2 * curve.points[i].second);

    CHECK_THROWS_AS(break_even_curve(1000, 10, ClientFraction::real(1.0), {10, 1}, Method::SplitSync),
                    InvalidParam);
    CHECK_THROWS_AS(break_even_curve(1000, 10, ClientFraction::real(1.0), {}, Method::SplitSync),
                    InvalidParam);
}

TEST_CASE("sweep evaluates the grid in lexicographic order")
{
    SUBCASE("two clients counts with no data")
    {
        const auto base = make(1, 10, 0, 1, ClientFraction::real(0.5));
        SweepGrid grid = SweepGrid::from(base);
        grid.clients = {1, 2};
        const auto rows = sweep(base, grid, Method::SplitSync);
        REQUIRE(rows.size() == 2);
        for (const auto& row : rows)
            CHECK(row.result->efficiency.winner == Winner::Split);
    }
    SUBCASE("3x3x3")
    {
        const auto base = make(1, 10, 12, 1, ClientFraction::real(0.5));
        SweepGrid grid = SweepGrid::from(base);
        grid.clients = {1, 2, 3};
        grid.model_params = {10, 20, 30};
        grid.smashed_size = {1, 2, 4};
        const auto rows = sweep(base, grid, Method::SplitNoSync);
        REQUIRE(rows.size() == 27);
        std::size_t i = 0;
        for (std::uint64_t k : {1, 2, 3})
            for (std::uint64_t n : {10, 20, 30})
                for (std::uint64_t q : {1, 2, 4}) {
                    CHECK(rows[i].params.clients == k);
                    CHECK(rows[i].params.model_params == n);
                    CHECK(rows[i].params.smashed_size == q);
                    ++i;
                }
    }
    SUBCASE("cell errors become row markers")
    {
        const auto base = make(1, 10, 7, 1, ClientFraction::real(0.5));
        SweepGrid grid = SweepGrid::from(base);
        grid.clients = {1, 2, 7};
        const auto rows = sweep(base, grid, Method::SplitSync);
        REQUIRE(rows.size() == 3);
        CHECK(rows[0].result.has_value());
        CHECK_FALSE(rows[1].result.has_value());
        CHECK(rows[1].error.rfind("DivisibilityError", 0) == 0);
        CHECK(rows[2].result.has_value());
        CHECK(sweep_csv_row(rows[1], Method::SplitSync) == "SplitSync,2,10,7,1,0.5,1,,,,,,error:DivisibilityError");
    }
    SUBCASE("empty axis")
    {
        const auto base = make(1, 10, 7, 1, ClientFraction::real(0.5));
        SweepGrid grid = SweepGrid::from(base);
        grid.smashed_size.clear();
        CHECK_THROWS_AS(sweep(base, grid, Method::SplitSync), EmptyList);
    }
}

TEST_CASE("client fraction representations")
{
    CHECK(ClientFraction::exact(15, 23).client_scalars(23) == 15);
    CHECK(ClientFraction::exact(1, 4).client_scalars(10) == 3);   // 2.5 rounds up
    CHECK(ClientFraction::real(0.1).client_scalars(6'000'000) == 600'000);
    CHECK(ClientFraction::parse("15/23") == ClientFraction::exact(15, 23));
    CHECK(ClientFraction::parse("0.25").value() == 0.25);
    CHECK(ClientFraction::exact(15, 23).to_string() == "15/23");
    CHECK_THROWS_AS(ClientFraction::real(1.5), InvalidParam);
    CHECK_THROWS_AS(ClientFraction::exact(3, 2), InvalidParam);
    CHECK_THROWS_AS(ClientFraction::parse("abc"), ConfigError);
}

TEST_CASE("CSV rows")
{
    const auto s = make(2, 23, 6, 3, ClientFraction::exact(15, 23));
    CHECK(comm_csv_header() ==
          "method,K,N,p,q,eta,epochs,per_client_scalars,total_scalars,per_client_bytes,total_bytes");
    CHECK(comm_csv_row(s, split_comm_sync(s)) == "SplitSync,2,23,6,3,0.652173913043,1,33,66,132,264");
    CHECK(format_real(1.0 / 3.0) == "0.333333333333");
    CHECK(format_real(20000.0) == "20000");
}

TEST_CASE("invalid parameters")
{
    CHECK_THROWS_AS(split_comm_sync(make(0, 1, 0, 1, ClientFraction::real(0.5))), InvalidParam);
    CHECK_THROWS_AS(split_comm_sync(make(1, 0, 0, 1, ClientFraction::real(0.5))), InvalidParam);
    CHECK_THROWS_AS(split_comm_sync(make(1, 1, 0, 0, ClientFraction::real(0.5))), InvalidParam);
    CHECK_THROWS_AS(split_comm_sync(make(1, 1, 0, 1, ClientFraction::real(0.5), 0)), InvalidParam);
}
