#include "splitfed/cli.hpp"

#include "splitfed/cost_model.hpp"
#include "splitfed/errors.hpp"
#include "splitfed/protocol.hpp"
#include "splitfed/scenario.hpp"
#include "splitfed/svg.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>

namespace splitfed::cli {

namespace {

// Guard for executable scenarios.
constexpr std::uint64_t kMaxSimulatedParams = 1'000'000;
constexpr std::uint64_t kMaxSimulatedRecords = 100'000;

struct Options {
    std::string scenario_path;
    std::string builtin_name;
    std::string variant;
    std::string csv;
    std::string svg;
    std::string k_range;
    std::string loss_csv;
    std::string fed_csv;
    bool include_labels = false;
    bool lenient = false;
    std::optional<std::uint64_t> dataset_size;
    std::optional<std::string> smashed_size;
    std::optional<std::string> eta;
};

void add_source_options(CLI::App& cmd, Options& opt)
{
    cmd.add_option("--scenario", opt.scenario_path, "Scenario file (key = value lines)");
    cmd.add_option("--builtin", opt.builtin_name,
                   "Built-in suite or case: smartwatch, hospital, biobank, golden, "
                   "hospital-case-3, ...");
}

void add_variant_option(CLI::App& cmd, Options& opt, bool allow_batch)
{
    auto* o = cmd.add_option("--variant", opt.variant, "Split learning variant");
    if (allow_batch)
        o->check(CLI::IsMember({"sync", "nosync", "sync-batch"}));
    else
        o->check(CLI::IsMember({"sync", "nosync"}));
}

void write_file(const std::string& path, const std::string& content)
{
    std::ofstream file(path, std::ios::binary);
    if (!file)
        throw ConfigError("cannot write " + path);
    file << content;
}

std::vector<scenario::ScenarioFile> load(const Options& opt, bool required = true)
{
    if (!opt.scenario_path.empty() && !opt.builtin_name.empty())
        throw ConfigError("use either --scenario or --builtin, not both");

    std::vector<scenario::ScenarioFile> files;
    if (!opt.scenario_path.empty())
        files.push_back(scenario::load_scenario(opt.scenario_path));
    else if (!opt.builtin_name.empty())
        files = scenario::builtin(opt.builtin_name);
    else if (required)
        throw ConfigError("a scenario is required (--scenario FILE or --builtin NAME)");

    std::optional<std::uint64_t> seed;
    if (const char* env = std::getenv("SPLITFED_SEED"); env && *env) {
        try {
            seed = scenario::parse_range(env).at(0);
        } catch (const std::exception&) {
            throw ConfigError(std::string("SPLITFED_SEED is not an integer: ") + env);
        }
    }
    for (auto& s : files) {
        if (!opt.variant.empty())
            s.variant = opt.variant;
        if (opt.include_labels)
            s.params.include_labels = true;
        if (opt.lenient)
            s.params.shards = cost::ShardPolicy::Lenient;
        if (seed)
            s.seed = *seed;
    }
    return files;
}

std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = text.find(',', start);
        auto item = text.substr(start, comma - start);
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        out.push_back(item);
        if (comma == std::string::npos)
            return out;
        start = comma + 1;
    }
}

cost::Method split_method(const std::string& variant)
{
    if (variant == "sync")
        return cost::Method::SplitSync;
    if (variant == "nosync")
        return cost::Method::SplitNoSync;
    throw ConfigError("variant '" + variant + "' is only supported by simulate");
}

std::string analyze_row(const cost::ScenarioParams& params, const cost::CommReport& report,
                        const cost::EfficiencyReport& eff)
{
    return cost::comm_csv_row(params, report) + ',' + cost::format_real(eff.rho) + ',' +
           std::string(cost::to_string(eff.winner));
}

int cmd_analyze(const Options& opt, std::ostream& out)
{
    std::string csv = cost::sweep_csv_header() + '\n';
    for (const auto& s : load(opt)) {
        const cost::Method method = split_method(s.variant);
        const cost::Evaluation eval = cost::evaluate(s.params, method);
        const auto& p = s.params;

        out << "scenario " << s.name << '\n';
        out << "  K=" << p.clients << " N=" << p.model_params << " p=" << p.dataset_size
            << " q=" << p.smashed_size << " eta=" << p.client_fraction.to_string()
            << " epochs=" << p.epochs << " bytes_per_scalar=" << p.bytes_per_scalar
            << (p.include_labels ? " labels=included" : "") << '\n';
        char line[160];
        std::snprintf(line, sizeof line, "  %-12s %20s %20s %20s\n", "method", "per_client_scalars",
                      "total_scalars", "total_bytes");
        out << line;
        for (const cost::CommReport* r : {&eval.sync, &eval.nosync, &eval.federated}) {
            std::snprintf(line, sizeof line, "  %-12s %20llu %20llu %20llu\n",
                          std::string(cost::to_string(r->method)).c_str(),
                          static_cast<unsigned long long>(r->per_client_scalars),
                          static_cast<unsigned long long>(r->total_scalars),
                          static_cast<unsigned long long>(r->total_bytes));
            out << line;
            csv += analyze_row(p, *r, eval.efficiency) + '\n';
        }
        out << "  rho(" << cost::to_string(method) << ") = " << cost::format_real(eval.efficiency.rho)
            << "  winner: " << cost::to_string(eval.efficiency.winner) << "\n\n";
    }
    if (!opt.csv.empty())
        write_file(opt.csv, csv);
    return kOk;
}

bool simulate_one(const scenario::ScenarioFile& s, const Options& opt, std::ostream& out)
{
    if (!s.model)
        throw ConfigError("simulate needs the model form (layers, cut)");

    cost::ScenarioParams params = s.params;
    if (params.model_params > kMaxSimulatedParams || params.dataset_size > kMaxSimulatedRecords)
        throw InvalidParam("scenario too large to simulate (limits: N <= 1000000, p <= 100000)");

    const auto& spec = s.model->spec;
    const auto cut = s.model->cut;
    const sim::ShardedDataset data = sim::partition_dataset(
        sim::synthetic_records(spec, params.dataset_size, s.seed), params.clients, params.shards);

    sim::SplitOptions split_opt;
    split_opt.lr = s.lr;
    split_opt.seed = s.seed;
    split_opt.batch_size = params.batch_size;
    sim::Protocol protocol = sim::Protocol::SplitSyncEpoch;
    if (s.variant == "sync") {
        split_opt.variant = sim::SplitVariant::SyncEpoch;
        split_opt.epochs = params.epochs;
    } else if (s.variant == "sync-batch") {
        split_opt.variant = sim::SplitVariant::SyncBatch;
        split_opt.epochs = params.epochs;
        protocol = sim::Protocol::SplitSyncBatch;
    } else {
        // One accounting epoch is a full cycle of K alternating turns.
        split_opt.variant = sim::SplitVariant::AlternatingNoSync;
        split_opt.epochs = params.epochs * params.clients;
        protocol = sim::Protocol::SplitAlternating;
    }
    sim::SplitRun split = sim::run_split_training(spec, cut, data, split_opt);
    if (s.inject_fault)
        split.ledger.record({0, sim::Endpoint::client_at(0), sim::Endpoint::server(), *s.inject_fault, 1});

    sim::FederatedOptions fed_opt;
    fed_opt.rounds = params.epochs;
    fed_opt.lr = s.lr;
    fed_opt.seed = s.seed;
    fed_opt.batch_size = params.batch_size;
    const sim::FederatedRun fed = sim::run_federated_training(spec, data, fed_opt);

    const sim::Verification split_check = sim::verify_against_model(split.ledger, params, protocol);
    const sim::Verification fed_check =
        sim::verify_against_model(fed.ledger, params, sim::Protocol::Federated);

    out << "scenario " << s.name << " (N=" << params.model_params << ", q=" << params.smashed_size
        << ", eta=" << params.client_fraction.to_string() << ", K=" << params.clients
        << ", p=" << params.dataset_size << ")\n";
    out << "  " << sim::to_string(protocol) << ": " << split.ledger.size() << " messages, "
        << split_check.measured_total << " scalars; " << split_check.summary() << '\n';
    out << "  Federated: " << fed.ledger.size() << " messages, " << fed_check.measured_total
        << " scalars; " << fed_check.summary() << '\n';

    if (!opt.csv.empty())
        write_file(opt.csv, split.ledger.to_csv());
    if (!opt.fed_csv.empty())
        write_file(opt.fed_csv, fed.ledger.to_csv());
    if (!opt.loss_csv.empty()) {
        std::string csv = "protocol,epoch,loss\n";
        for (std::size_t e = 0; e < split.epoch_loss.size(); ++e)
            csv += std::string(sim::to_string(protocol)) + ',' + std::to_string(e) + ',' +
                   cost::format_real(split.epoch_loss[e]) + '\n';
        for (std::size_t r = 0; r < fed.round_loss.size(); ++r)
            csv += "Federated," + std::to_string(r) + ',' + cost::format_real(fed.round_loss[r]) + '\n';
        write_file(opt.loss_csv, csv);
    }

    const bool ok = split_check.exact_match && fed_check.exact_match;
    out << "verdict: " << (ok ? "exact match" : "mismatch") << '\n';
    return ok;
}

int cmd_simulate(const Options& opt, std::ostream& out)
{
    const auto files = load(opt);
    if (files.size() > 1 && !(opt.csv.empty() && opt.fed_csv.empty() && opt.loss_csv.empty()))
        throw ConfigError("output files need a single scenario");
    bool ok = true;
    for (const auto& s : files)
        ok = simulate_one(s, opt, out) && ok;
    return ok ? kOk : kVerificationMismatch;
}

int cmd_breakeven(const Options& opt, std::ostream& out)
{
    const auto files = load(opt, false);
    if (files.size() > 1)
        throw ConfigError("breakeven takes a single scenario");

    std::optional<std::uint64_t> p = opt.dataset_size;
    std::vector<std::uint64_t> qs;
    std::vector<cost::ClientFraction> etas;
    if (opt.smashed_size)
        qs = scenario::parse_range(*opt.smashed_size);
    if (opt.eta)
        for (const auto& item : split_list(*opt.eta))
            etas.push_back(cost::ClientFraction::parse(item));
    std::string variant = opt.variant.empty() ? "sync" : opt.variant;
    std::optional<std::vector<std::uint64_t>> ks;

    if (!files.empty()) {
        const auto& s = files.front();
        p = p.value_or(s.params.dataset_size);
        if (qs.empty())
            qs = s.grid_smashed_size.value_or(std::vector<std::uint64_t>{s.params.smashed_size});
        if (etas.empty())
            etas = s.grid_client_fraction.value_or(std::vector<cost::ClientFraction>{s.params.client_fraction});
        variant = s.variant;
        ks = s.grid_clients;
    }
    const cost::Method method = split_method(variant);
    if (!p || qs.empty())
        throw ConfigError("breakeven needs -p and -q (or a scenario)");
    if (etas.empty()) {
        if (method == cost::Method::SplitSync)
            throw ConfigError("breakeven for the sync variant needs --eta (or a scenario)");
        etas.push_back(cost::ClientFraction::exact(0, 1));
    }
    if (!opt.k_range.empty())
        ks = scenario::parse_range(opt.k_range);
    if (!ks)
        throw ConfigError("breakeven needs --k-range A:B:STEP (or grid.clients in the scenario)");
    if (ks->empty())
        throw InvalidParam("client range is empty");

    // One curve per (q, eta); eta does not enter the no-sync curve.
    if (method == cost::Method::SplitNoSync)
        etas.resize(1);
    std::vector<cost::BreakEvenCurve> curves;
    for (const std::uint64_t q : qs)
        for (const auto& eta : etas)
            curves.push_back(cost::break_even_curve(*p, q, eta, *ks, method));

    const bool several = curves.size() > 1;
    std::string csv = several ? "q,eta,K,N_break_even\n" : "K,N_break_even\n";
    for (const auto& curve : curves)
        for (const auto& [k, n] : curve.points) {
            if (several)
                csv += std::to_string(curve.smashed_size) + ',' + curve.client_fraction.to_string() + ',';
            csv += std::to_string(k) + ',' + cost::format_real(n) + '\n';
        }

    if (opt.csv.empty())
        out << csv;
    else
        write_file(opt.csv, csv);
    if (!opt.svg.empty())
        write_file(opt.svg, svg::render_break_even(curves, "Break-even model size"));
    return kOk;
}

int cmd_sweep(const Options& opt, std::ostream& out)
{
    std::string csv = cost::sweep_csv_header() + '\n';
    for (const auto& s : load(opt)) {
        const cost::Method method = split_method(s.variant);
        const cost::SweepGrid grid = s.grid();
        if (grid.size() == 0)
            throw ConfigError("scenario " + s.name + " has an empty grid axis");
        for (const auto& row : cost::sweep(s.params, grid, method))
            csv += cost::sweep_csv_row(row, method) + '\n';
    }
    if (opt.csv.empty())
        out << csv;
    else
        write_file(opt.csv, csv);
    return kOk;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Communication cost of split learning versus federated learning", "splitfed"};
    app.require_subcommand(1);

    Options opt;
    auto* analyze = app.add_subcommand("analyze", "Closed-form communication and efficiency ratio");
    add_source_options(*analyze, opt);
    add_variant_option(*analyze, opt, false);
    analyze->add_flag("--include-labels", opt.include_labels, "Count label uploads");
    analyze->add_flag("--lenient-shards", opt.lenient, "Allow p not divisible by K");
    analyze->add_option("--csv", opt.csv, "Write reports as CSV");

    auto* simulate = app.add_subcommand("simulate", "Run the protocols and check the ledger");
    add_source_options(*simulate, opt);
    add_variant_option(*simulate, opt, true);
    simulate->add_flag("--include-labels", opt.include_labels, "Also verify label uploads");
    simulate->add_flag("--lenient-shards", opt.lenient, "Allow p not divisible by K");
    simulate->add_option("--csv", opt.csv, "Write the split-learning ledger as CSV");
    simulate->add_option("--fed-csv", opt.fed_csv, "Write the federated ledger as CSV");
    simulate->add_option("--loss-csv", opt.loss_csv, "Write per-epoch losses as CSV");

    auto* breakeven = app.add_subcommand("breakeven", "Break-even model size N* against K");
    add_source_options(*breakeven, opt);
    add_variant_option(*breakeven, opt, false);
    breakeven->add_option("-p,--dataset-size", opt.dataset_size, "Total records p");
    breakeven->add_option("-q,--smashed-size", opt.smashed_size,
                          "Scalars per record at the cut (a list or range gives one curve each)");
    breakeven->add_option("--eta", opt.eta, "Client-side parameter fraction (real or a/b; comma list for several curves)");
    breakeven->add_option("--k-range", opt.k_range, "Client counts: A:B:STEP, A:B:xFACTOR or a list");
    breakeven->add_option("--csv", opt.csv, "Write the curve as CSV instead of stdout");
    breakeven->add_option("--svg", opt.svg, "Write a log-log plot of the curve");

    auto* sweep = app.add_subcommand("sweep", "Evaluate a parameter grid");
    add_source_options(*sweep, opt);
    add_variant_option(*sweep, opt, false);
    sweep->add_flag("--include-labels", opt.include_labels, "Count label uploads");
    sweep->add_flag("--lenient-shards", opt.lenient, "Allow p not divisible by K");
    sweep->add_option("--csv", opt.csv, "Write the table as CSV instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (analyze->parsed())
            return cmd_analyze(opt, out);
        if (simulate->parsed())
            return cmd_simulate(opt, out);
        if (breakeven->parsed())
            return cmd_breakeven(opt, out);
        return cmd_sweep(opt, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const Error& e) {
        err << "error: " << e.kind() << ": " << e.what() << '\n';
        return kDomainError;
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    std::vector<const char*> argv{"splitfed"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace splitfed::cli
