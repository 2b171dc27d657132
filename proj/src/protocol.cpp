#include "splitfed/protocol.hpp"

#include "splitfed/errors.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>

namespace splitfed::sim {

namespace {

bool excluded(const KindSet& exclude, MessageKind kind) { return exclude.count(kind) != 0; }

// Record-weighted running mean of batch losses.
struct LossMeter {
    double sum = 0.0;
    std::size_t records = 0;

    void add(double loss, std::size_t n)
    {
        sum += loss * static_cast<double>(n);
        records += n;
    }
    double mean() const { return records == 0 ? 0.0 : sum / static_cast<double>(records); }
};

// Client-side state of one split-learning participant plus the shared
// server. Processes one batch through the cut and logs the exchange.
class SplitSession {
public:
    SplitSession(const nn::ModelSpec& spec, nn::CutPoint cut, const SplitOptions& options,
                 nn::ParamVector server_params, TrafficLedger& ledger)
        : spec_(spec), cut_(cut), options_(options),
          server_(std::move(server_params)), ledger_(ledger)
    {
    }

    void train_batch(std::uint64_t epoch, std::size_t client, nn::ParamVector& client_params,
                     std::span<const nn::Record> records, LossMeter& loss)
    {
        const auto [inputs, labels] = nn::make_batch(spec_, records);
        const Endpoint self = Endpoint::client_at(client);
        const Endpoint server = Endpoint::server();

        const nn::Matrix smashed = nn::forward_front(spec_, cut_, client_params, inputs);
        ledger_.record({epoch, self, server, MessageKind::Activations, smashed.data.size()});
        ledger_.record({epoch, self, server, MessageKind::Labels, labels.data.size()});

        const nn::ServerGradient step = nn::backward_back(spec_, cut_, server_, smashed, labels);
        server_ = nn::sgd_step(server_, step.params, options_.lr);
        ledger_.record({epoch, server, self, MessageKind::Gradients, step.smashed_grad.data.size()});

        const nn::ParamVector grads =
            nn::backward_front(spec_, cut_, client_params, inputs, step.smashed_grad);
        client_params = nn::sgd_step(client_params, grads, options_.lr);
        loss.add(step.loss, records.size());
    }

    nn::ParamVector take_server() { return std::move(server_); }

private:
    const nn::ModelSpec& spec_;
    nn::CutPoint cut_;
    const SplitOptions& options_;
    nn::ParamVector server_;
    TrafficLedger& ledger_;
};

} // namespace

std::string Endpoint::to_string() const
{
    return role == Role::Server ? "server" : "client" + std::to_string(client + 1);
}

std::string_view to_string(MessageKind kind)
{
    switch (kind) {
    case MessageKind::Activations: return "Activations";
    case MessageKind::Labels: return "Labels";
    case MessageKind::Gradients: return "Gradients";
    case MessageKind::ClientWeights: return "ClientWeights";
    case MessageKind::GlobalWeights: return "GlobalWeights";
    }
    return "?";
}

MessageKind parse_message_kind(std::string_view text)
{
    for (const MessageKind kind : {MessageKind::Activations, MessageKind::Labels,
                                   MessageKind::Gradients, MessageKind::ClientWeights,
                                   MessageKind::GlobalWeights})
        if (text == to_string(kind))
            return kind;
    throw ConfigError("unknown message kind '" + std::string(text) + "'");
}

Direction Message::direction() const
{
    if (sender.is_client() && receiver.is_client())
        return Direction::Peer;
    return sender.is_client() ? Direction::Upstream : Direction::Downstream;
}

std::uint64_t TrafficLedger::total(const KindSet& exclude) const
{
    std::uint64_t sum = 0;
    for (const Message& m : messages_)
        if (!excluded(exclude, m.kind))
            sum += m.scalar_count;
    return sum;
}

std::uint64_t TrafficLedger::total_by_kind(MessageKind kind) const
{
    std::uint64_t sum = 0;
    for (const Message& m : messages_)
        if (m.kind == kind)
            sum += m.scalar_count;
    return sum;
}

std::size_t TrafficLedger::count_by_kind(MessageKind kind) const
{
    return static_cast<std::size_t>(std::count_if(
        messages_.begin(), messages_.end(), [kind](const Message& m) { return m.kind == kind; }));
}

std::uint64_t TrafficLedger::total_for_endpoint(const Endpoint& endpoint, const KindSet& exclude) const
{
    std::uint64_t sum = 0;
    for (const Message& m : messages_)
        if (!excluded(exclude, m.kind) && (m.sender == endpoint || m.receiver == endpoint))
            sum += m.scalar_count;
    return sum;
}

std::uint64_t TrafficLedger::total_for_direction(Direction direction, const KindSet& exclude) const
{
    std::uint64_t sum = 0;
    for (const Message& m : messages_)
        if (!excluded(exclude, m.kind) && m.direction() == direction)
            sum += m.scalar_count;
    return sum;
}

std::uint64_t TrafficLedger::total_for_epoch(std::uint64_t epoch, const KindSet& exclude) const
{
    std::uint64_t sum = 0;
    for (const Message& m : messages_)
        if (!excluded(exclude, m.kind) && m.epoch == epoch)
            sum += m.scalar_count;
    return sum;
}

void TrafficLedger::write_csv(std::ostream& out) const
{
    out << "epoch,sender,receiver,kind,scalar_count\n";
    for (const Message& m : messages_)
        out << m.epoch << ',' << m.sender.to_string() << ',' << m.receiver.to_string() << ','
            << to_string(m.kind) << ',' << m.scalar_count << '\n';
}

std::string TrafficLedger::to_csv() const
{
    std::ostringstream out;
    write_csv(out);
    return out.str();
}

std::string_view to_string(SplitVariant variant)
{
    switch (variant) {
    case SplitVariant::SyncEpoch: return "SyncEpoch";
    case SplitVariant::SyncBatch: return "SyncBatch";
    case SplitVariant::AlternatingNoSync: return "AlternatingNoSync";
    }
    return "?";
}

std::size_t ShardedDataset::total_records() const
{
    std::size_t n = 0;
    for (const auto& shard : shards)
        n += shard.size();
    return n;
}

std::vector<std::uint64_t> ShardedDataset::sizes() const
{
    std::vector<std::uint64_t> out;
    out.reserve(shards.size());
    for (const auto& shard : shards)
        out.push_back(shard.size());
    return out;
}

ShardedDataset partition_dataset(std::vector<nn::Record> records, std::size_t clients,
                                 cost::ShardPolicy policy)
{
    cost::ScenarioParams layout;
    layout.clients = clients;
    layout.dataset_size = records.size();
    layout.shards = policy;
    const std::vector<std::uint64_t> sizes = layout.shard_sizes();

    ShardedDataset out;
    out.shards.reserve(clients);
    auto it = std::make_move_iterator(records.begin());
    for (const std::uint64_t n : sizes) {
        auto end = it + static_cast<std::ptrdiff_t>(n);
        out.shards.emplace_back(it, end);
        it = end;
    }
    return out;
}

std::vector<nn::Record> synthetic_records(const nn::ModelSpec& spec, std::size_t count,
                                          std::uint64_t seed)
{
    spec.validate();
    nn::SplitMix64 rng(seed ^ 0x5eed5eed5eed5eedULL);
    std::vector<nn::Record> out(count);
    for (nn::Record& rec : out) {
        rec.input.resize(spec.input_width());
        rec.label.resize(spec.output_width());
        for (double& x : rec.input)
            x = rng.next_symmetric(1.0);
        for (double& y : rec.label)
            y = rng.next_symmetric(1.0);
    }
    return out;
}

SplitRun run_split_training(const nn::ModelSpec& spec, nn::CutPoint cut,
                            const ShardedDataset& data, const SplitOptions& options)
{
    const nn::CutStats stats = nn::cut_stats(spec, cut);
    if (data.clients() == 0)
        throw InvalidParam("split training needs at least one client");
    if (options.batch_size == 0)
        throw InvalidParam("batch size must be at least 1");

    const std::size_t clients = data.clients();
    auto [client_init, server_init] = nn::split_params(spec, cut, nn::init_params(spec, options.seed));

    SplitRun run;
    run.client_params.assign(clients, client_init);
    SplitSession session(spec, cut, options, std::move(server_init), run.ledger);

    auto hand_over = [&](std::uint64_t epoch, std::size_t from) {
        const std::size_t to = (from + 1) % clients;
        run.ledger.record({epoch, Endpoint::client_at(from), Endpoint::client_at(to),
                           MessageKind::ClientWeights, stats.client_params});
        if (to != from)
            run.client_params[to] = run.client_params[from];
        run.holder = to;
    };

    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        LossMeter loss;
        const bool alternating = options.variant == SplitVariant::AlternatingNoSync;
        const std::size_t first = alternating ? epoch % clients : 0;
        const std::size_t last = alternating ? first + 1 : clients;

        for (std::size_t k = first; k < last; ++k) {
            const std::span<const nn::Record> shard = data.shards[k];
            for (std::size_t start = 0; start < shard.size(); start += options.batch_size) {
                const auto batch = shard.subspan(start, std::min(options.batch_size, shard.size() - start));
                session.train_batch(epoch, k, run.client_params[k], batch, loss);
                run.holder = k;
                if (options.variant == SplitVariant::SyncBatch)
                    hand_over(epoch, k);
            }
            if (options.variant == SplitVariant::SyncEpoch)
                hand_over(epoch, k);
            if (alternating)
                run.holder = k;
        }
        run.epoch_loss.push_back(loss.mean());
    }
    run.server_params = session.take_server();
    return run;
}

FederatedRun run_federated_training(const nn::ModelSpec& spec, const ShardedDataset& data,
                                    const FederatedOptions& options)
{
    if (data.clients() == 0)
        throw InvalidParam("federated training needs at least one client");
    const std::uint64_t model_size = nn::param_count(spec);

    FederatedRun run;
    run.global_params = nn::init_params(spec, options.seed);
    for (std::size_t round = 0; round < options.rounds; ++round) {
        for (std::size_t k = 0; k < data.clients(); ++k)
            run.ledger.record({round, Endpoint::server(), Endpoint::client_at(k),
                               MessageKind::GlobalWeights, model_size});

        LossMeter loss;
        std::vector<nn::ParamVector> uploads;
        uploads.reserve(data.clients());
        for (std::size_t k = 0; k < data.clients(); ++k) {
            nn::ParamVector local = run.global_params;
            const double local_loss =
                nn::sgd_epoch(spec, local, data.shards[k], options.lr, options.batch_size);
            loss.add(local_loss, data.shards[k].size());
            run.ledger.record({round, Endpoint::client_at(k), Endpoint::server(),
                               MessageKind::ClientWeights, model_size});
            uploads.push_back(std::move(local));
        }
        run.global_params = nn::average_params(uploads);
        run.round_loss.push_back(loss.mean());
    }
    return run;
}

cost::CommReport measured_comm(const TrafficLedger& ledger, std::size_t clients,
                               const KindSet& exclude, std::uint64_t bytes_per_scalar)
{
    cost::CommReport report;
    if (ledger.count_by_kind(MessageKind::GlobalWeights) > 0)
        report.method = cost::Method::Federated;
    else if (ledger.count_by_kind(MessageKind::ClientWeights) > 0)
        report.method = cost::Method::SplitSync;
    else
        report.method = cost::Method::SplitNoSync;

    std::vector<std::uint64_t> per_client(clients, 0);
    auto charge = [&](const Endpoint& e, std::uint64_t n) {
        if (e.is_client() && e.client < clients)
            per_client[e.client] += n;
    };
    for (const Message& m : ledger.messages()) {
        if (excluded(exclude, m.kind))
            continue;
        report.total_scalars += m.scalar_count;
        charge(m.sender, m.scalar_count);
        if (m.direction() != Direction::Peer)
            charge(m.receiver, m.scalar_count);
    }
    report.per_client_scalars =
        per_client.empty() ? 0 : *std::max_element(per_client.begin(), per_client.end());
    report.per_client_bytes = report.per_client_scalars * bytes_per_scalar;
    report.total_bytes = report.total_scalars * bytes_per_scalar;
    return report;
}

std::string_view to_string(Protocol protocol)
{
    switch (protocol) {
    case Protocol::SplitSyncEpoch: return "SplitSyncEpoch";
    case Protocol::SplitSyncBatch: return "SplitSyncBatch";
    case Protocol::SplitAlternating: return "SplitAlternating";
    case Protocol::Federated: return "Federated";
    }
    return "?";
}

Verification verify_against_model(const TrafficLedger& ledger, const cost::ScenarioParams& params,
                                  Protocol protocol)
{
    params.validate();
    const std::uint64_t epochs = params.epochs;
    const std::uint64_t exchanged = params.dataset_size * params.smashed_size * epochs;
    const bool split = protocol != Protocol::Federated;

    std::uint64_t client_weights = 0;
    std::uint64_t global_weights = 0;
    cost::CommReport formula;
    switch (protocol) {
    case Protocol::SplitSyncEpoch:
        formula = cost::split_comm_sync(params);
        client_weights =
            params.client_fraction.client_scalars(params.model_params) * params.clients * epochs;
        break;
    case Protocol::SplitSyncBatch: {
        formula = cost::split_comm_sync_batch(params);
        std::uint64_t batches = 0;
        for (const std::uint64_t n : params.shard_sizes())
            batches += (n + params.batch_size - 1) / params.batch_size;
        client_weights = params.client_fraction.client_scalars(params.model_params) * batches * epochs;
        break;
    }
    case Protocol::SplitAlternating:
        formula = cost::split_comm_nosync(params);
        break;
    case Protocol::Federated:
        formula = cost::federated_comm(params);
        client_weights = params.model_params * params.clients * epochs;
        global_weights = client_weights;
        break;
    }

    std::vector<KindDelta> expected{
        {MessageKind::Activations, split ? exchanged : 0},
        {MessageKind::Gradients, split ? exchanged : 0},
        {MessageKind::ClientWeights, client_weights},
        {MessageKind::GlobalWeights, global_weights},
    };
    KindSet exclude = kExcludeLabels;
    if (params.include_labels) {
        expected.push_back({MessageKind::Labels,
                            split ? params.dataset_size * params.label_width * epochs : 0});
        exclude.clear();
    }

    Verification out;
    out.expected_total = formula.total_scalars;
    out.measured_total = ledger.total(exclude);
    std::uint64_t expected_sum = 0;
    bool kinds_match = true;
    for (KindDelta& d : expected) {
        d.measured = ledger.total_by_kind(d.kind);
        expected_sum += d.expected;
        kinds_match = kinds_match && d.delta() == 0;
    }
    out.per_kind = std::move(expected);
    out.exact_match =
        kinds_match && expected_sum == out.expected_total && out.measured_total == out.expected_total;
    return out;
}

std::string Verification::summary() const
{
    if (exact_match)
        return "exact match";
    std::ostringstream out;
    out << "mismatch: total expected " << expected_total << ", measured " << measured_total;
    for (const KindDelta& d : per_kind)
        if (d.delta() != 0)
            out << "; " << to_string(d.kind) << ' ' << (d.delta() > 0 ? "+" : "") << d.delta()
                << " (expected " << d.expected << ", measured " << d.measured << ')';
    return out.str();
}

cost::ScenarioParams derive_params(const nn::ModelSpec& spec, nn::CutPoint cut,
                                   std::uint64_t clients, std::uint64_t dataset_size)
{
    const nn::CutStats stats = nn::cut_stats(spec, cut);
    cost::ScenarioParams params;
    params.clients = clients;
    params.model_params = stats.total_params;
    params.dataset_size = dataset_size;
    params.smashed_size = stats.smashed_size;
    params.client_fraction = stats.client_fraction();
    params.label_width = spec.output_width();
    return params;
}

} // namespace splitfed::sim
