#include "splitfed/errors.hpp"
#include "splitfed/scenario.hpp"

#include <doctest.h>

#include <algorithm>

using namespace splitfed;
using namespace splitfed::scenario;

TEST_CASE("raw form")
{
    const ScenarioFile s = parse_scenario(R"(
# comment line
name = raw-example
clients = 2          # trailing comment
model_params = 23
dataset_size = 6
smashed_size = 3
client_fraction = 15/23
epochs = 4
bytes_per_scalar = 8
)");
    CHECK(s.name == "raw-example");
    CHECK_FALSE(s.model);
    CHECK(s.params.clients == 2);
    CHECK(s.params.model_params == 23);
    CHECK(s.params.dataset_size == 6);
    CHECK(s.params.smashed_size == 3);
    CHECK(s.params.client_fraction.is_exact());
    CHECK(s.params.client_fraction.client_scalars(23) == 15);
    CHECK(s.params.epochs == 4);
    CHECK(s.params.bytes_per_scalar == 8);
    CHECK(s.variant == "sync");
    CHECK_FALSE(s.has_grid());
}

TEST_CASE("symbol aliases and scientific counts")
{
    const ScenarioFile s = parse_scenario("K = 1e4\nN = 1e8\np = 1e6\nq = 1e3\neta = 0.01\nE = 2\n");
    CHECK(s.params.clients == 10000);
    CHECK(s.params.model_params == 100000000);
    CHECK(s.params.dataset_size == 1000000);
    CHECK(s.params.smashed_size == 1000);
    CHECK(s.params.client_fraction.value() == doctest::Approx(0.01));
    CHECK(s.params.epochs == 2);
}

TEST_CASE("model form derives the symbols")
{
    const ScenarioFile s = parse_scenario(R"(
layers = 4,3,2
cut = 1
activation = sigmoid
clients = 2
dataset_size = 6
variant = nosync
seed = 9
lr = 0.5
include_labels = yes
)");
    REQUIRE(s.model);
    CHECK(s.model->spec.layer_widths == std::vector<std::size_t>{4, 3, 2});
    CHECK(s.model->spec.activation == nn::Activation::Sigmoid);
    CHECK(s.model->cut.index == 1);
    CHECK(s.params.model_params == 23);
    CHECK(s.params.smashed_size == 3);
    CHECK(s.params.client_fraction.client_scalars(23) == 15);
    CHECK(s.params.label_width == 2);
    CHECK(s.params.include_labels);
    CHECK(s.variant == "nosync");
    CHECK(s.seed == 9);
    CHECK(s.lr == 0.5);
}

TEST_CASE("grids")
{
    const ScenarioFile s = parse_scenario(R"(
clients = 2
model_params = 23
dataset_size = 6
smashed_size = 3
client_fraction = 0.5
grid.K = 1:1000:x10
grid.dataset_size = 10,20
grid.client_fraction = 0.1, 1/4
)");
    CHECK(s.has_grid());
    const cost::SweepGrid g = s.grid();
    CHECK(g.clients == std::vector<std::uint64_t>{1, 10, 100, 1000});
    CHECK(g.model_params == std::vector<std::uint64_t>{23});
    CHECK(g.dataset_size == std::vector<std::uint64_t>{10, 20});
    CHECK(g.smashed_size == std::vector<std::uint64_t>{3});
    REQUIRE(g.client_fraction.size() == 2);
    CHECK(g.client_fraction[1].is_exact());
    CHECK(g.size() == 16);

    const ScenarioFile empty = parse_scenario("K=1\nN=1\np=1\nq=1\neta=0\ngrid.clients =\n");
    CHECK(empty.grid().clients.empty());
}

TEST_CASE("parse_range")
{
    CHECK(parse_range("1,10,100") == std::vector<std::uint64_t>{1, 10, 100});
    CHECK(parse_range("10:50:20") == std::vector<std::uint64_t>{10, 30, 50});
    CHECK(parse_range("10:55:20") == std::vector<std::uint64_t>{10, 30, 50});
    CHECK(parse_range("1:100:x10") == std::vector<std::uint64_t>{1, 10, 100});
    CHECK(parse_range("2:9:x2") == std::vector<std::uint64_t>{2, 4, 8});
    CHECK(parse_range("7:7:1") == std::vector<std::uint64_t>{7});
    CHECK(parse_range("").empty());
    CHECK(parse_range("1e2,1e3") == std::vector<std::uint64_t>{100, 1000});
    CHECK(parse_range("1:18446744073709551615:x2").size() == 64);
    CHECK(parse_range("18446744073709551610:18446744073709551615:4").size() == 2);

    CHECK_THROWS_AS(parse_range("100:10:5"), InvalidParam);
    CHECK_THROWS_AS(parse_range("1:10:0"), InvalidParam);
    CHECK_THROWS_AS(parse_range("1:10:x1"), InvalidParam);
    CHECK_THROWS_AS(parse_range("1:10"), InvalidParam);
    CHECK_THROWS_AS(parse_range("a,b"), InvalidParam);
    CHECK_THROWS_AS(parse_range("-5"), InvalidParam);
    CHECK_THROWS_AS(parse_range("1.5"), InvalidParam);
}

TEST_CASE("config errors")
{
    const std::string raw = "K=2\nN=23\np=6\nq=3\neta=0.5\n";
    CHECK_THROWS_AS(parse_scenario(raw + "colour = red\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(raw + "K = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(raw + "clients = 3\n"), ConfigError);   // alias duplicates
    CHECK_THROWS_AS(parse_scenario(raw + "just text\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(raw + "layers = 4,3,2\ncut = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("K=2\np=6\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("K=2\nN=23\np=6\neta=0.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("N=23\np=6\nq=3\neta=0.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("K=2\nN=x\np=6\nq=3\neta=0.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(raw + "variant = async\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(raw + "shards = loose\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(raw + "include_labels = maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("layers=4,3,2\ncut=1\nK=2\np=6\ngrid.N=1,2\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("layers=4,3,2\ncut=1\nK=2\np=6\nlabel_width=3\n"), ConfigError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.cfg"), ConfigError);

    try {
        parse_scenario("K=2\nN=23\n\np=six\nq=3\neta=0.5\n");
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
}

TEST_CASE("out-of-range values are domain errors")
{
    CHECK_THROWS_AS(parse_scenario("K=0\nN=23\np=6\nq=3\neta=0.5\n"), InvalidParam);
    CHECK_THROWS_AS(parse_scenario("K=2\nN=23\np=6\nq=3\neta=1.5\n"), InvalidParam);
    CHECK_THROWS_AS(parse_scenario("layers=4,3,2\ncut=2\nK=2\np=6\n"), CutOutOfRange);
    CHECK_THROWS_AS(parse_scenario("layers=4,3,2\ncut=0\nK=2\np=6\n"), CutOutOfRange);
    CHECK_THROWS_AS(parse_scenario("layers=4\ncut=1\nK=2\np=6\n"), DomainError);
}

TEST_CASE("built-in suites")
{
    const auto names = builtin_names();
    CHECK(names.size() == 12);
    CHECK(builtin("smartwatch").size() == 3);
    CHECK(builtin("hospital").size() == 3);
    CHECK(builtin("biobank").size() == 2);
    CHECK(builtin("small").size() == 3);
    CHECK(builtin("golden").size() == 1);
    CHECK(builtin("hospital-case-3").size() == 1);
    CHECK_THROWS_AS(builtin("smart"), ConfigError);
    CHECK_THROWS_AS(builtin("nope"), ConfigError);
    for (const auto& name : names)
        CHECK(builtin(name).front().name == name);

    const auto golden = builtin("golden").front();
    REQUIRE(golden.model);
    CHECK(golden.params.model_params == 23);
    CHECK(golden.seed == 42);
}

TEST_CASE("built-in winners")
{
    struct Expect {
        const char* name;
        cost::Winner winner;
        double rho;
    };
    const Expect cases[] = {
        {"smartwatch-case-1", cost::Winner::Split, 1.2e12 / 6.02e10},
        {"smartwatch-case-2", cost::Winner::Split, 2e10 / 1.2e9},
        {"smartwatch-case-3", cost::Winner::Federated, 2e8 / 2.1e8},
        {"hospital-case-1", cost::Winner::Federated, 2e9 / 2.01e9},
        {"hospital-case-2", cost::Winner::Split, 3.2e9 / 2.016e9},
        {"hospital-case-3", cost::Winner::Federated, 1e9 / 2.0005e10},
        {"biobank-case-1", cost::Winner::Split, 2e12 / 1.2e10},
        {"biobank-case-2", cost::Winner::Split, 4e11 / 4e9},
    };
    for (const auto& c : cases) {
        CAPTURE(c.name);
        const auto s = builtin(c.name).front();
        const auto report = cost::efficiency_ratio(s.params, cost::Method::SplitSync);
        CHECK(report.winner == c.winner);
        CHECK(report.rho == doctest::Approx(c.rho).epsilon(1e-12));
    }
}
