#include "splitfed/cost_model.hpp"

#include "splitfed/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace splitfed::cost {

namespace {

__extension__ typedef unsigned __int128 uint128;

std::uint64_t mul(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t out = 0;
    if (__builtin_mul_overflow(a, b, &out))
        throw InvalidParam("scalar count overflows 64 bits");
    return out;
}

std::uint64_t add(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t out = 0;
    if (__builtin_add_overflow(a, b, &out))
        throw InvalidParam("scalar count overflows 64 bits");
    return out;
}

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return a / b + (a % b != 0 ? 1 : 0); }

CommReport make_report(Method method, std::uint64_t per_client, std::uint64_t total,
                       const ScenarioParams& params)
{
    CommReport r;
    r.method = method;
    r.per_client_scalars = mul(per_client, params.epochs);
    r.total_scalars = mul(total, params.epochs);
    r.per_client_bytes = mul(r.per_client_scalars, params.bytes_per_scalar);
    r.total_bytes = mul(r.total_scalars, params.bytes_per_scalar);
    return r;
}

std::uint64_t label_scalars(const ScenarioParams& params, std::uint64_t records)
{
    return params.include_labels ? mul(records, params.label_width) : 0;
}

std::uint64_t parse_uint(std::string_view text)
{
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ConfigError("not a non-negative integer: '" + std::string(text) + "'");
    return value;
}

// Records held by the first (largest) shard; checks divisibility in strict mode.
std::uint64_t largest_shard(const ScenarioParams& params)
{
    if (params.shards == ShardPolicy::Strict && params.dataset_size % params.clients != 0)
        throw DivisibilityError("dataset size " + std::to_string(params.dataset_size) +
                                " is not divisible by " + std::to_string(params.clients) + " clients");
    return ceil_div(params.dataset_size, params.clients);
}

EfficiencyReport ratio_from(long double federated, long double split)
{
    EfficiencyReport out;
    if (split <= 0.0L) {
        out.rho = std::numeric_limits<double>::infinity();
        out.winner = Winner::Split;
        out.defined = false;
        return out;
    }
    out.rho = static_cast<double>(federated / split);
    out.winner = classify(out.rho);
    return out;
}

void check_split_method(Method method)
{
    if (method == Method::Federated)
        throw InvalidParam("efficiency is defined against a split learning method");
}

} // namespace

ClientFraction ClientFraction::exact(std::uint64_t client_params, std::uint64_t total_params)
{
    if (total_params == 0)
        throw InvalidParam("client fraction denominator must be positive");
    if (client_params > total_params)
        throw InvalidParam("client fraction must lie in [0, 1]");
    ClientFraction f;
    f.exact_ = true;
    f.num_ = client_params;
    f.den_ = total_params;
    return f;
}

ClientFraction ClientFraction::real(double eta)
{
    if (!(eta >= 0.0 && eta <= 1.0))
        throw InvalidParam("client fraction must lie in [0, 1]");
    ClientFraction f;
    f.exact_ = false;
    f.num_ = 0;
    f.den_ = 1;
    f.real_ = eta;
    return f;
}

double ClientFraction::value() const
{
    if (!exact_)
        return real_;
    return static_cast<double>(static_cast<long double>(num_) / static_cast<long double>(den_));
}

long double ClientFraction::times(long double model_params) const
{
    if (!exact_)
        return static_cast<long double>(real_) * model_params;
    if (model_params == static_cast<long double>(den_))
        return static_cast<long double>(num_);
    return static_cast<long double>(num_) * model_params / static_cast<long double>(den_);
}

std::uint64_t ClientFraction::client_scalars(std::uint64_t model_params) const
{
    if (exact_) {
        if (model_params == den_)
            return num_;
        const uint128 scaled = static_cast<uint128>(num_) * model_params;
        const auto quotient = static_cast<std::uint64_t>(scaled / den_);
        const auto remainder = static_cast<std::uint64_t>(scaled % den_);
        // Round half up; the deviation is at most half a scalar.
        return quotient + (2 * static_cast<uint128>(remainder) >= den_ ? 1 : 0);
    }
    const long double scaled = static_cast<long double>(real_) * model_params;
    const long double rounded = std::nearbyint(scaled);
    if (!std::isfinite(scaled) || std::fabs(rounded - scaled) > 0.5L ||
        rounded > static_cast<long double>(std::numeric_limits<std::uint64_t>::max()))
        throw InvalidParam("eta * N cannot be represented as a scalar count");
    return static_cast<std::uint64_t>(rounded);
}

std::string ClientFraction::to_string() const
{
    if (exact_)
        return std::to_string(num_) + "/" + std::to_string(den_);
    return format_real(real_);
}

ClientFraction ClientFraction::parse(std::string_view text)
{
    if (const auto slash = text.find('/'); slash != std::string_view::npos)
        return exact(parse_uint(text.substr(0, slash)), parse_uint(text.substr(slash + 1)));
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ConfigError("not a client fraction: '" + std::string(text) + "'");
    return real(value);
}

std::string_view to_string(Method method)
{
    switch (method) {
    case Method::SplitSync: return "SplitSync";
    case Method::SplitNoSync: return "SplitNoSync";
    case Method::Federated: return "Federated";
    }
    return "?";
}

Method parse_method(std::string_view text)
{
    if (text == "sync" || text == "SplitSync")
        return Method::SplitSync;
    if (text == "nosync" || text == "SplitNoSync")
        return Method::SplitNoSync;
    if (text == "federated" || text == "Federated")
        return Method::Federated;
    throw ConfigError("unknown method '" + std::string(text) + "'");
}

std::string_view to_string(Winner winner)
{
    switch (winner) {
    case Winner::Split: return "Split";
    case Winner::Federated: return "Federated";
    case Winner::Tie: return "Tie";
    }
    return "?";
}

void ScenarioParams::validate() const
{
    if (clients < 1)
        throw InvalidParam("clients K must be at least 1");
    if (model_params < 1)
        throw InvalidParam("model size N must be at least 1");
    if (smashed_size < 1)
        throw InvalidParam("smashed size q must be at least 1");
    if (epochs < 1)
        throw InvalidParam("epochs E must be at least 1");
    if (bytes_per_scalar < 1)
        throw InvalidParam("bytes_per_scalar must be at least 1");
    if (batch_size < 1)
        throw InvalidParam("batch size must be at least 1");
    if (include_labels && label_width < 1)
        throw InvalidParam("label width must be at least 1");
}

std::vector<std::uint64_t> ScenarioParams::shard_sizes() const
{
    if (clients < 1)
        throw InvalidParam("clients K must be at least 1");
    largest_shard(*this);
    const std::uint64_t remainder = dataset_size % clients;
    std::vector<std::uint64_t> sizes(clients, dataset_size / clients);
    for (std::uint64_t k = 0; k < remainder; ++k)
        ++sizes[k];
    return sizes;
}

Winner classify(double rho)
{
    if (std::isinf(rho) && rho > 0)
        return Winner::Split;
    if (std::fabs(rho - 1.0) <= kTieTolerance)
        return Winner::Tie;
    return rho > 1.0 ? Winner::Split : Winner::Federated;
}

CommReport split_comm_sync(const ScenarioParams& params)
{
    params.validate();
    const std::uint64_t largest = largest_shard(params);
    const std::uint64_t weights = params.client_fraction.client_scalars(params.model_params);
    const std::uint64_t activations = mul(params.dataset_size, params.smashed_size);

    const std::uint64_t per_client =
        add(add(mul(2, mul(largest, params.smashed_size)), weights), label_scalars(params, largest));
    const std::uint64_t total = add(add(mul(2, activations), mul(weights, params.clients)),
                                    label_scalars(params, params.dataset_size));
    return make_report(Method::SplitSync, per_client, total, params);
}

CommReport split_comm_nosync(const ScenarioParams& params)
{
    params.validate();
    const std::uint64_t largest = largest_shard(params);
    const std::uint64_t per_client =
        add(mul(2, mul(largest, params.smashed_size)), label_scalars(params, largest));
    const std::uint64_t total = add(mul(2, mul(params.dataset_size, params.smashed_size)),
                                    label_scalars(params, params.dataset_size));
    return make_report(Method::SplitNoSync, per_client, total, params);
}

CommReport federated_comm(const ScenarioParams& params)
{
    params.validate();
    const std::uint64_t per_client = mul(2, params.model_params);
    return make_report(Method::Federated, per_client, mul(per_client, params.clients), params);
}

CommReport split_comm_sync_batch(const ScenarioParams& params)
{
    params.validate();
    const std::uint64_t weights = params.client_fraction.client_scalars(params.model_params);
    std::uint64_t per_client = 0;
    std::uint64_t batches = 0;
    for (const std::uint64_t records : params.shard_sizes()) {
        const std::uint64_t turns = ceil_div(records, params.batch_size);
        batches = add(batches, turns);
        per_client = std::max(per_client, add(add(mul(2, mul(records, params.smashed_size)),
                                                  mul(weights, turns)),
                                              label_scalars(params, records)));
    }
    const std::uint64_t total =
        add(add(mul(2, mul(params.dataset_size, params.smashed_size)), mul(weights, batches)),
            label_scalars(params, params.dataset_size));
    return make_report(Method::SplitSync, per_client, total, params);
}

CommReport comm_for(const ScenarioParams& params, Method method)
{
    switch (method) {
    case Method::SplitSync: return split_comm_sync(params);
    case Method::SplitNoSync: return split_comm_nosync(params);
    case Method::Federated: return federated_comm(params);
    }
    throw InvalidParam("unknown method");
}

EfficiencyReport efficiency_ratio(const ScenarioParams& params, Method method)
{
    params.validate();
    check_split_method(method);
    const auto n = static_cast<long double>(params.model_params);
    const auto k = static_cast<long double>(params.clients);
    const auto p = static_cast<long double>(params.dataset_size);
    const auto q = static_cast<long double>(params.smashed_size);

    long double split = 2.0L * p * q;
    if (method == Method::SplitSync)
        split += params.client_fraction.times(n) * k;
    if (params.include_labels)
        split += p * static_cast<long double>(params.label_width);
    return ratio_from(2.0L * n * k, split);
}

EfficiencyReport efficiency_ratio_at(long double model_params, std::uint64_t dataset_size,
                                     std::uint64_t smashed_size, std::uint64_t clients,
                                     const ClientFraction& eta, Method method)
{
    check_split_method(method);
    if (!(model_params > 0.0L) || clients < 1 || smashed_size < 1)
        throw InvalidParam("N, K and q must be positive");
    const auto k = static_cast<long double>(clients);
    long double split =
        2.0L * static_cast<long double>(dataset_size) * static_cast<long double>(smashed_size);
    if (method == Method::SplitSync)
        split += eta.times(model_params) * k;
    return ratio_from(2.0L * model_params * k, split);
}

double break_even_model_size(std::uint64_t dataset_size, std::uint64_t smashed_size,
                             std::uint64_t clients, const ClientFraction& eta, Method method)
{
    check_split_method(method);
    if (dataset_size == 0 || smashed_size == 0)
        throw InvalidParam("break-even needs p >= 1 and q >= 1");
    if (clients < 1)
        throw InvalidParam("break-even needs K >= 1");
    const long double pq =
        static_cast<long double>(dataset_size) * static_cast<long double>(smashed_size);
    const auto k = static_cast<long double>(clients);
    if (method == Method::SplitNoSync)
        return static_cast<double>(pq / k);
    const long double e = eta.is_exact() ? static_cast<long double>(eta.numerator()) /
                                               static_cast<long double>(eta.denominator())
                                         : static_cast<long double>(eta.value());
    return static_cast<double>(2.0L * pq / ((2.0L - e) * k));
}

BreakEvenCurve break_even_curve(std::uint64_t dataset_size, std::uint64_t smashed_size,
                                const ClientFraction& eta, const std::vector<std::uint64_t>& clients,
                                Method method)
{
    if (clients.empty())
        throw InvalidParam("break-even curve needs at least one client count");
    if (!std::is_sorted(clients.begin(), clients.end(), std::less_equal<>{}) ||
        std::adjacent_find(clients.begin(), clients.end()) != clients.end())
        throw InvalidParam("client counts must be strictly increasing");

    BreakEvenCurve curve;
    curve.method = method;
    curve.dataset_size = dataset_size;
    curve.smashed_size = smashed_size;
    curve.client_fraction = eta;
    curve.points.reserve(clients.size());
    for (const std::uint64_t k : clients)
        curve.points.emplace_back(k, break_even_model_size(dataset_size, smashed_size, k, eta, method));
    return curve;
}

Evaluation evaluate(const ScenarioParams& params, Method method)
{
    check_split_method(method);
    Evaluation out;
    out.sync = split_comm_sync(params);
    out.nosync = split_comm_nosync(params);
    out.federated = federated_comm(params);
    out.efficiency = efficiency_ratio(params, method);
    return out;
}

SweepGrid SweepGrid::from(const ScenarioParams& base)
{
    return SweepGrid{{base.clients}, {base.model_params}, {base.dataset_size},
                     {base.smashed_size}, {base.client_fraction}};
}

std::size_t SweepGrid::size() const
{
    return clients.size() * model_params.size() * dataset_size.size() * smashed_size.size() *
           client_fraction.size();
}

std::vector<SweepRow> sweep(const ScenarioParams& base, const SweepGrid& grid, Method method)
{
    if (grid.size() == 0)
        throw EmptyList("sweep grid has an empty axis");

    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    for (const auto k : grid.clients)
        for (const auto n : grid.model_params)
            for (const auto p : grid.dataset_size)
                for (const auto q : grid.smashed_size)
                    for (const auto& eta : grid.client_fraction) {
                        SweepRow row;
                        row.params = base;
                        row.params.clients = k;
                        row.params.model_params = n;
                        row.params.dataset_size = p;
                        row.params.smashed_size = q;
                        row.params.client_fraction = eta;
                        try {
                            row.result = evaluate(row.params, method);
                        } catch (const Error& e) {
                            row.error = std::string(e.kind()) + ": " + e.what();
                        }
                        rows.push_back(std::move(row));
                    }
    return rows;
}

std::string format_real(double value)
{
    if (std::isnan(value))
        return "nan";
    if (std::isinf(value))
        return value > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    return buf;
}

std::string comm_csv_header()
{
    return "method,K,N,p,q,eta,epochs,per_client_scalars,total_scalars,per_client_bytes,total_bytes";
}

namespace {

std::string params_columns(const ScenarioParams& params, Method method)
{
    std::string out(to_string(method));
    for (const std::uint64_t v : {params.clients, params.model_params, params.dataset_size,
                                  params.smashed_size}) {
        out += ',';
        out += std::to_string(v);
    }
    out += ',' + format_real(params.client_fraction.value());
    out += ',' + std::to_string(params.epochs);
    return out;
}

} // namespace

std::string comm_csv_row(const ScenarioParams& params, const CommReport& report)
{
    std::string out = params_columns(params, report.method);
    for (const std::uint64_t v : {report.per_client_scalars, report.total_scalars,
                                  report.per_client_bytes, report.total_bytes}) {
        out += ',';
        out += std::to_string(v);
    }
    return out;
}

std::string sweep_csv_header() { return comm_csv_header() + ",rho,winner"; }

std::string sweep_csv_row(const SweepRow& row, Method method)
{
    if (!row.result) {
        const std::string kind = row.error.substr(0, row.error.find(':'));
        return params_columns(row.params, method) + ",,,,,,error:" + kind;
    }
    const CommReport& report = method == Method::SplitSync ? row.result->sync : row.result->nosync;
    return comm_csv_row(row.params, report) + ',' + format_real(row.result->efficiency.rho) + ',' +
           std::string(to_string(row.result->efficiency.winner));
}

} // namespace splitfed::cost
