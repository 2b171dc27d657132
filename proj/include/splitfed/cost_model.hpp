#pragma once

// Closed-form communication accounting for split learning and federated
// averaging, the efficiency ratio between them and the break-even locus.
//
// Scalars are the canonical unit. Bytes are derived via bytes_per_scalar.
// All quantities are "per epoch" and scaled by the epoch count, where one
// federated round counts as one epoch.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace splitfed::cost {

/// Fraction of model parameters held client-side.
///
/// Either an exact ratio of integer parameter counts (as derived from a
/// model and a cut point) or a bare real for analytic-only scenarios.
class ClientFraction {
public:
    ClientFraction() = default;

    static ClientFraction exact(std::uint64_t client_params, std::uint64_t total_params);
    static ClientFraction real(double eta);

    bool is_exact() const { return exact_; }
    double value() const;
    std::uint64_t numerator() const { return num_; }
    std::uint64_t denominator() const { return den_; }

    /// eta * N as an integer scalar count. Exact when the denominator is N;
    /// otherwise rounded to nearest, failing if that moves it by more than
    /// half a scalar.
    std::uint64_t client_scalars(std::uint64_t model_params) const;

    /// eta * N without rounding.
    long double times(long double model_params) const;

    /// "15/23" for exact fractions, 12 significant digits otherwise.
    std::string to_string() const;

    static ClientFraction parse(std::string_view text);

    friend bool operator==(const ClientFraction&, const ClientFraction&) = default;

private:
    bool exact_ = true;
    std::uint64_t num_ = 0;
    std::uint64_t den_ = 1;
    double real_ = 0.0;
};

enum class ShardPolicy { Strict, Lenient };

enum class Method { SplitSync, SplitNoSync, Federated };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);

struct ScenarioParams {
    std::uint64_t clients = 1;        // K
    std::uint64_t model_params = 1;   // N
    std::uint64_t dataset_size = 0;   // p, total records across clients
    std::uint64_t smashed_size = 1;   // q, scalars per record at the cut
    ClientFraction client_fraction;   // eta
    std::uint64_t bytes_per_scalar = 4;
    std::uint64_t epochs = 1;         // E

    // Accounting options.
    ShardPolicy shards = ShardPolicy::Strict;
    bool include_labels = false;
    std::uint64_t label_width = 1;
    std::uint64_t batch_size = 1;     // only affects batch-level sync

    /// Throws InvalidParam on any violated type invariant.
    void validate() const;

    /// Records held by each client under the shard policy. Strict mode
    /// throws DivisibilityError when K does not divide p.
    std::vector<std::uint64_t> shard_sizes() const;
};

struct CommReport {
    Method method = Method::SplitSync;
    std::uint64_t per_client_scalars = 0;
    std::uint64_t total_scalars = 0;
    std::uint64_t per_client_bytes = 0;
    std::uint64_t total_bytes = 0;
};

enum class Winner { Split, Federated, Tie };

std::string_view to_string(Winner winner);

inline constexpr double kTieTolerance = 1e-12;

struct EfficiencyReport {
    double rho = 1.0;        // federated total / split total
    Winner winner = Winner::Tie;
    bool defined = true;     // false when the split total is zero; rho is +inf
};

Winner classify(double rho);

CommReport split_comm_sync(const ScenarioParams& params);
CommReport split_comm_nosync(const ScenarioParams& params);
CommReport federated_comm(const ScenarioParams& params);

/// Split learning where client weights are handed on after every batch
/// instead of every epoch: 2pq + eta*N*(batches summed over clients).
CommReport split_comm_sync_batch(const ScenarioParams& params);

CommReport comm_for(const ScenarioParams& params, Method method);

/// rho = 2NK / split total; method must be SplitSync or SplitNoSync.
EfficiencyReport efficiency_ratio(const ScenarioParams& params, Method method);

/// rho evaluated at a real-valued model size, for checking the break-even
/// locus where N* is generally not an integer.
EfficiencyReport efficiency_ratio_at(long double model_params, std::uint64_t dataset_size,
                                     std::uint64_t smashed_size, std::uint64_t clients,
                                     const ClientFraction& eta, Method method);

/// Model size N* at which rho = 1.
double break_even_model_size(std::uint64_t dataset_size, std::uint64_t smashed_size,
                             std::uint64_t clients, const ClientFraction& eta, Method method);

struct BreakEvenCurve {
    Method method = Method::SplitSync;
    std::uint64_t dataset_size = 0;
    std::uint64_t smashed_size = 0;
    ClientFraction client_fraction;
    std::vector<std::pair<std::uint64_t, double>> points;   // (K, N*)
};

/// `clients` must be strictly increasing, which makes N* strictly decreasing.
BreakEvenCurve break_even_curve(std::uint64_t dataset_size, std::uint64_t smashed_size,
                                const ClientFraction& eta, const std::vector<std::uint64_t>& clients,
                                Method method);

struct Evaluation {
    CommReport sync;
    CommReport nosync;
    CommReport federated;
    EfficiencyReport efficiency;   // for the requested split method
};

Evaluation evaluate(const ScenarioParams& params, Method method);

struct SweepGrid {
    std::vector<std::uint64_t> clients;
    std::vector<std::uint64_t> model_params;
    std::vector<std::uint64_t> dataset_size;
    std::vector<std::uint64_t> smashed_size;
    std::vector<ClientFraction> client_fraction;

    /// Grid whose every axis holds the single value from `base`.
    static SweepGrid from(const ScenarioParams& base);
    std::size_t size() const;
};

struct SweepRow {
    ScenarioParams params;
    std::optional<Evaluation> result;
    std::string error;   // "<ErrorKind>: message" when result is empty
};

/// Cartesian product in lexicographic (K, N, p, q, eta) order. Non-grid
/// fields come from `base`. Per-cell errors become row markers.
std::vector<SweepRow> sweep(const ScenarioParams& base, const SweepGrid& grid, Method method);

// CSV serialisation. Integers are written verbatim, reals with 12
// significant digits.
std::string format_real(double value);
std::string comm_csv_header();
std::string comm_csv_row(const ScenarioParams& params, const CommReport& report);
std::string sweep_csv_header();
std::string sweep_csv_row(const SweepRow& row, Method method);

} // namespace splitfed::cost
