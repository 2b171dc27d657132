#include "splitfed/scenario.hpp"

#include "splitfed/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace splitfed::scenario {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

// Non-negative integer, plain digits or an integral "1e6" style literal.
std::uint64_t parse_count(std::string_view text)
{
    text = trim(text);
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec == std::errc{} && ptr == text.data() + text.size())
        return value;

    double real = 0.0;
    auto [rptr, rec] = std::from_chars(text.data(), text.data() + text.size(), real);
    if (rec == std::errc{} && rptr == text.data() + text.size() && real >= 0.0 &&
        real < 0x1.0p63 && std::floor(real) == real)
        return static_cast<std::uint64_t>(real);
    throw InvalidParam("not a non-negative integer: '" + std::string(text) + "'");
}

double parse_double(std::string_view text)
{
    text = trim(text);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ConfigError("not a number: '" + std::string(text) + "'");
    return value;
}

bool parse_bool(std::string_view text)
{
    if (text == "true" || text == "yes" || text == "1")
        return true;
    if (text == "false" || text == "no" || text == "0")
        return false;
    throw ConfigError("not a boolean: '" + std::string(text) + "'");
}

struct Entry {
    std::string value;
    int line = 0;
};

const std::map<std::string, std::string, std::less<>>& aliases()
{
    static const std::map<std::string, std::string, std::less<>> table{
        {"K", "clients"},        {"N", "model_params"},        {"p", "dataset_size"},
        {"q", "smashed_size"},   {"eta", "client_fraction"},   {"E", "epochs"},
        {"grid.K", "grid.clients"},           {"grid.N", "grid.model_params"},
        {"grid.p", "grid.dataset_size"},      {"grid.q", "grid.smashed_size"},
        {"grid.eta", "grid.client_fraction"},
    };
    return table;
}

const std::set<std::string, std::less<>>& known_keys()
{
    static const std::set<std::string, std::less<>> keys{
        "name", "clients", "model_params", "dataset_size", "smashed_size", "client_fraction",
        "layers", "cut", "activation", "variant", "epochs", "bytes_per_scalar", "seed", "lr",
        "batch_size", "label_width", "include_labels", "shards", "inject_fault",
        "grid.clients", "grid.model_params", "grid.dataset_size", "grid.smashed_size",
        "grid.client_fraction",
    };
    return keys;
}

class Reader {
public:
    explicit Reader(std::map<std::string, Entry, std::less<>> entries) : entries_(std::move(entries)) {}

    bool has(std::string_view key) const { return entries_.count(key) != 0; }

    // Re-raises value errors as config errors naming the line.
    template <typename F>
    auto wrap(std::string_view key, F&& f) const
    {
        try {
            return f();
        } catch (const InvalidParam& e) {
            const auto it = entries_.find(key);
            throw ConfigError("line " + std::to_string(it->second.line) + ": " + std::string(key) +
                              ": " + e.what());
        }
    }

    const std::string* get(std::string_view key) const
    {
        const auto it = entries_.find(key);
        return it == entries_.end() ? nullptr : &it->second.value;
    }

    std::uint64_t count(std::string_view key) const
    {
        return wrap(key, [&] { return parse_count(*get(key)); });
    }

    std::vector<std::uint64_t> range(std::string_view key) const
    {
        return wrap(key, [&] { return parse_range(*get(key)); });
    }

    std::string_view require(std::string_view key, std::string_view form) const
    {
        if (!has(key))
            throw ConfigError("missing key '" + std::string(key) + "' for the " + std::string(form) +
                              " form");
        return *get(key);
    }

private:
    std::map<std::string, Entry, std::less<>> entries_;
};

ScenarioFile interpret(const Reader& in)
{
    ScenarioFile out;
    if (auto v = in.get("name"))
        out.name = *v;

    const bool raw = in.has("model_params") || in.has("smashed_size") || in.has("client_fraction");
    const bool model = in.has("layers") || in.has("cut") || in.has("activation");
    if (raw == model)
        throw ConfigError(
            "a scenario needs exactly one of the raw form (model_params, smashed_size, "
            "client_fraction) or the model form (layers, cut)");
    const std::string_view form = raw ? "raw" : "model";

    in.require("clients", form);
    in.require("dataset_size", form);
    const std::uint64_t clients = in.count("clients");
    const std::uint64_t dataset_size = in.count("dataset_size");

    cost::ScenarioParams& params = out.params;
    if (raw) {
        in.require("model_params", form);
        in.require("smashed_size", form);
        params.clients = clients;
        params.dataset_size = dataset_size;
        params.model_params = in.count("model_params");
        params.smashed_size = in.count("smashed_size");
        params.client_fraction = cost::ClientFraction::parse(in.require("client_fraction", form));
        if (in.has("label_width"))
            params.label_width = in.count("label_width");
    } else {
        ModelForm m;
        in.require("layers", form);
        in.require("cut", form);
        for (const std::uint64_t width : in.range("layers"))
            m.spec.layer_widths.push_back(width);
        m.cut.index = in.count("cut");
        if (auto v = in.get("activation"))
            m.spec.activation = nn::parse_activation(*v);
        if (in.has("label_width"))
            throw ConfigError("label_width follows the model output width in the model form");
        m.spec.validate();
        params = sim::derive_params(m.spec, m.cut, clients, dataset_size);
        out.model = std::move(m);
        for (const char* key : {"grid.model_params", "grid.smashed_size", "grid.client_fraction"})
            if (in.has(key))
                throw ConfigError(std::string(key) + " is only valid in the raw form");
    }

    if (in.has("epochs"))
        params.epochs = in.count("epochs");
    if (in.has("bytes_per_scalar"))
        params.bytes_per_scalar = in.count("bytes_per_scalar");
    if (in.has("batch_size"))
        params.batch_size = in.count("batch_size");
    if (auto v = in.get("include_labels"))
        params.include_labels = parse_bool(*v);
    if (auto v = in.get("shards")) {
        if (*v == "strict")
            params.shards = cost::ShardPolicy::Strict;
        else if (*v == "lenient")
            params.shards = cost::ShardPolicy::Lenient;
        else
            throw ConfigError("shards must be 'strict' or 'lenient'");
    }
    if (auto v = in.get("variant")) {
        if (*v != "sync" && *v != "nosync" && *v != "sync-batch")
            throw ConfigError("variant must be sync, nosync or sync-batch");
        out.variant = *v;
    }
    if (in.has("seed"))
        out.seed = in.count("seed");
    if (auto v = in.get("lr"))
        out.lr = parse_double(*v);
    if (auto v = in.get("inject_fault"))
        out.inject_fault = sim::parse_message_kind(*v);

    if (in.has("grid.clients"))
        out.grid_clients = in.range("grid.clients");
    if (in.has("grid.model_params"))
        out.grid_model_params = in.range("grid.model_params");
    if (in.has("grid.dataset_size"))
        out.grid_dataset_size = in.range("grid.dataset_size");
    if (in.has("grid.smashed_size"))
        out.grid_smashed_size = in.range("grid.smashed_size");
    if (auto v = in.get("grid.client_fraction")) {
        std::vector<cost::ClientFraction> etas;
        if (!trim(*v).empty())
            for (const auto item : split(*v, ','))
                etas.push_back(cost::ClientFraction::parse(item));
        out.grid_client_fraction = std::move(etas);
    }

    params.validate();
    return out;
}

// Parameters for the use-case suites sit inside the ranges the use cases
// describe (client counts, model sizes, dataset sizes); exact bar values are
// not recoverable, so only the winner of each case is meaningful.
constexpr std::string_view kBuiltins[] = {
    R"(name = smartwatch-case-1
# big model, many watches
clients = 100000
model_params = 6000000
dataset_size = 1000000
smashed_size = 100
client_fraction = 0.1
)",
    R"(name = smartwatch-case-2
# smaller model
clients = 10000
model_params = 1000000
dataset_size = 1000000
smashed_size = 100
client_fraction = 0.1
)",
    R"(name = smartwatch-case-3
# small model and fewer clients
clients = 100
model_params = 1000000
dataset_size = 1000000
smashed_size = 100
client_fraction = 0.1
)",
    R"(name = hospital-case-1
# large model, few hospitals
clients = 10
model_params = 100000000
dataset_size = 1000000
smashed_size = 1000
client_fraction = 0.01
)",
    R"(name = hospital-case-2
# slightly more hospitals
clients = 16
model_params = 100000000
dataset_size = 1000000
smashed_size = 1000
client_fraction = 0.01
)",
    R"(name = hospital-case-3
# bigger dataset, fewer hospitals
clients = 5
model_params = 100000000
dataset_size = 10000000
smashed_size = 1000
client_fraction = 0.01
)",
    R"(name = biobank-case-1
clients = 10000
model_params = 100000000
dataset_size = 1000000
smashed_size = 1000
client_fraction = 0.01
)",
    R"(name = biobank-case-2
clients = 1000
model_params = 200000000
dataset_size = 1000000
smashed_size = 1000
client_fraction = 0.01
)",
    R"(name = golden
layers = 4,3,2
cut = 1
clients = 2
dataset_size = 6
seed = 42
)",
    R"(name = small-nosync
layers = 4,3,2
cut = 1
clients = 2
dataset_size = 6
variant = nosync
epochs = 2
seed = 42
)",
    R"(name = small-sync-batch
layers = 5,4,3,2
cut = 2
clients = 3
dataset_size = 12
variant = sync-batch
batch_size = 2
activation = sigmoid
seed = 7
)",
    R"(name = small-lenient
layers = 4,8,2
cut = 1
clients = 3
dataset_size = 7
shards = lenient
include_labels = true
epochs = 3
seed = 3
)",
};

} // namespace

bool ScenarioFile::has_grid() const
{
    return grid_clients || grid_model_params || grid_dataset_size || grid_smashed_size ||
           grid_client_fraction;
}

cost::SweepGrid ScenarioFile::grid() const
{
    cost::SweepGrid g = cost::SweepGrid::from(params);
    if (grid_clients)
        g.clients = *grid_clients;
    if (grid_model_params)
        g.model_params = *grid_model_params;
    if (grid_dataset_size)
        g.dataset_size = *grid_dataset_size;
    if (grid_smashed_size)
        g.smashed_size = *grid_smashed_size;
    if (grid_client_fraction)
        g.client_fraction = *grid_client_fraction;
    return g;
}

ScenarioFile parse_scenario(std::string_view text)
{
    std::map<std::string, Entry, std::less<>> entries;
    int line_no = 0;
    for (const auto raw_line : split(text, '\n')) {
        ++line_no;
        std::string_view line = raw_line.substr(0, raw_line.find('#'));
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        if (const auto alias = aliases().find(key); alias != aliases().end())
            key = alias->second;
        if (!known_keys().count(key))
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        if (!entries.emplace(key, Entry{std::string(value), line_no}).second)
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    return interpret(Reader(std::move(entries)));
}

ScenarioFile load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read scenario file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_scenario(text.str());
}

std::vector<std::uint64_t> parse_range(std::string_view text)
{
    text = trim(text);
    std::vector<std::uint64_t> out;
    if (text.empty())
        return out;
    if (text.find(':') == std::string_view::npos) {
        for (const auto item : split(text, ','))
            out.push_back(parse_count(item));
        return out;
    }

    const auto parts = split(text, ':');
    if (parts.size() != 3)
        throw InvalidParam("range must look like A:B:STEP or A:B:xFACTOR");
    const std::uint64_t from = parse_count(parts[0]);
    const std::uint64_t to = parse_count(parts[1]);
    if (from > to)
        throw InvalidParam("range start exceeds its end");
    const bool geometric = !parts[2].empty() && parts[2].front() == 'x';
    const std::uint64_t step = parse_count(geometric ? parts[2].substr(1) : parts[2]);

    if (geometric) {
        if (step < 2 || from == 0)
            throw InvalidParam("geometric range needs a start >= 1 and a factor >= 2");
        for (std::uint64_t v = from; v <= to; v *= step) {
            out.push_back(v);
            if (v > to / step)
                break;
        }
    } else {
        if (step == 0)
            throw InvalidParam("range step must be positive");
        for (std::uint64_t v = from; v <= to; v += step) {
            out.push_back(v);
            if (to - v < step)
                break;
        }
    }
    return out;
}

std::vector<ScenarioFile> builtin(std::string_view name)
{
    std::vector<ScenarioFile> out;
    for (const std::string_view text : kBuiltins) {
        ScenarioFile s = parse_scenario(text);
        const bool in_suite = s.name.size() > name.size() && s.name.compare(0, name.size(), name) == 0 &&
                              s.name[name.size()] == '-';
        if (s.name == name || in_suite)
            out.push_back(std::move(s));
    }
    if (out.empty())
        throw ConfigError("unknown built-in scenario '" + std::string(name) + "'");
    return out;
}

std::vector<std::string> builtin_names()
{
    std::vector<std::string> out;
    for (const std::string_view text : kBuiltins)
        out.push_back(parse_scenario(text).name);
    return out;
}

} // namespace splitfed::scenario
