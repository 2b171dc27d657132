#pragma once

// Deterministic execution of split learning and federated averaging over
// an in-process message bus. Every transfer is appended to a TrafficLedger,
// which is the measurement side of the ledger-vs-formula cross-check.

#include "splitfed/cost_model.hpp"
#include "splitfed/nn.hpp"

#include <cstdint>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace splitfed::sim {

struct Endpoint {
    enum class Role { Server, Client };

    Role role = Role::Server;
    std::size_t client = 0;   // 0-based; ignored for the server

    static Endpoint server() { return {}; }
    static Endpoint client_at(std::size_t index) { return {Role::Client, index}; }

    bool is_client() const { return role == Role::Client; }

    /// "server" or "client<k>" with k 1-based.
    std::string to_string() const;

    friend bool operator==(const Endpoint& a, const Endpoint& b)
    {
        return a.role == b.role && (a.role == Role::Server || a.client == b.client);
    }
};

enum class MessageKind { Activations, Labels, Gradients, ClientWeights, GlobalWeights };

std::string_view to_string(MessageKind kind);
MessageKind parse_message_kind(std::string_view text);

using KindSet = std::set<MessageKind>;

inline const KindSet kExcludeLabels{MessageKind::Labels};

enum class Direction { Upstream, Downstream, Peer };   // client->server, server->client, client->client

struct Message {
    std::uint64_t epoch = 0;   // 0-based epoch (or round)
    Endpoint sender;
    Endpoint receiver;
    MessageKind kind = MessageKind::Activations;
    std::uint64_t scalar_count = 0;

    Direction direction() const;
};

/// Append-only log of simulated messages in event order.
class TrafficLedger {
public:
    void record(const Message& message) { messages_.push_back(message); }

    std::span<const Message> messages() const { return messages_; }
    std::size_t size() const { return messages_.size(); }
    bool empty() const { return messages_.empty(); }

    std::uint64_t total(const KindSet& exclude = {}) const;
    std::uint64_t total_by_kind(MessageKind kind) const;
    std::size_t count_by_kind(MessageKind kind) const;
    /// Scalars sent plus received by `endpoint`.
    std::uint64_t total_for_endpoint(const Endpoint& endpoint, const KindSet& exclude = {}) const;
    std::uint64_t total_for_direction(Direction direction, const KindSet& exclude = {}) const;
    std::uint64_t total_for_epoch(std::uint64_t epoch, const KindSet& exclude = {}) const;

    /// Columns epoch,sender,receiver,kind,scalar_count in event order.
    void write_csv(std::ostream& out) const;
    std::string to_csv() const;

private:
    std::vector<Message> messages_;
};

enum class SplitVariant { SyncEpoch, SyncBatch, AlternatingNoSync };

std::string_view to_string(SplitVariant variant);

struct ShardedDataset {
    std::vector<std::vector<nn::Record>> shards;

    std::size_t clients() const { return shards.size(); }
    std::size_t total_records() const;
    std::vector<std::uint64_t> sizes() const;
};

/// Contiguous shards in record order. Lenient mode gives the remainder to
/// the first (p mod K) clients.
ShardedDataset partition_dataset(std::vector<nn::Record> records, std::size_t clients,
                                 cost::ShardPolicy policy);

/// Inputs and labels uniform in [-1, 1) from a splitmix64 stream.
std::vector<nn::Record> synthetic_records(const nn::ModelSpec& spec, std::size_t count,
                                          std::uint64_t seed);

struct SplitOptions {
    SplitVariant variant = SplitVariant::SyncEpoch;
    std::size_t epochs = 1;
    double lr = 0.01;
    std::uint64_t seed = 0;
    std::size_t batch_size = 1;
};

struct SplitRun {
    std::vector<nn::ParamVector> client_params;   // each client's final copy
    std::size_t holder = 0;                       // client holding the newest client-side weights
    nn::ParamVector server_params;
    TrafficLedger ledger;
    std::vector<double> epoch_loss;

    /// Newest client-side weights joined with the server weights.
    nn::ParamVector model() const { return nn::join_params(client_params[holder], server_params); }
};

/// Per epoch, clients take turns in index order. Each batch sends
/// Activations and Labels up and Gradients down. SyncEpoch hands the
/// client-side weights to the next client after every turn (the last client
/// hands them to the first); SyncBatch does so after every batch;
/// AlternatingNoSync lets only client (e mod K) work in epoch e and never
/// moves weights between clients.
SplitRun run_split_training(const nn::ModelSpec& spec, nn::CutPoint cut,
                            const ShardedDataset& data, const SplitOptions& options);

struct FederatedOptions {
    std::size_t rounds = 1;
    double lr = 0.01;
    std::uint64_t seed = 0;
    std::size_t batch_size = 1;
};

struct FederatedRun {
    nn::ParamVector global_params;
    TrafficLedger ledger;
    std::vector<double> round_loss;
};

/// Per round the server broadcasts the global model, every client trains one
/// local epoch and uploads its full model, and the server averages uploads.
FederatedRun run_federated_training(const nn::ModelSpec& spec, const ShardedDataset& data,
                                    const FederatedOptions& options);

/// Communication measured from a ledger. Client-to-client transfers count
/// toward the sender only, matching the per-client column of the closed
/// forms. The method is inferred from the message kinds present.
cost::CommReport measured_comm(const TrafficLedger& ledger, std::size_t clients,
                               const KindSet& exclude = kExcludeLabels,
                               std::uint64_t bytes_per_scalar = 4);

enum class Protocol { SplitSyncEpoch, SplitSyncBatch, SplitAlternating, Federated };

std::string_view to_string(Protocol protocol);

struct KindDelta {
    MessageKind kind;
    std::uint64_t expected = 0;
    std::uint64_t measured = 0;

    std::int64_t delta() const
    {
        return static_cast<std::int64_t>(measured) - static_cast<std::int64_t>(expected);
    }
};

struct Verification {
    bool exact_match = false;
    std::uint64_t expected_total = 0;   // closed-form total for the scenario
    std::uint64_t measured_total = 0;
    std::vector<KindDelta> per_kind;

    /// "exact match" or a mismatch report naming each differing kind.
    std::string summary() const;
};

/// Exact comparison of ledger totals against the closed forms. For
/// SplitAlternating, params.epochs counts K-epoch cycles, so the ledger must
/// come from a run of K * params.epochs simulated epochs. Labels are only
/// compared when params.include_labels is set.
Verification verify_against_model(const TrafficLedger& ledger, const cost::ScenarioParams& params,
                                  Protocol protocol);

/// Scenario parameters realised by a model, cut and equal-or-lenient shards.
cost::ScenarioParams derive_params(const nn::ModelSpec& spec, nn::CutPoint cut,
                                   std::uint64_t clients, std::uint64_t dataset_size);

} // namespace splitfed::sim
