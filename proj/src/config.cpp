#include "spikenas/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace spikenas {

namespace {

const std::vector<std::pair<const char*, const char*>>& default_entries() {
    static const std::vector<std::pair<const char*, const char*>> kDefaults = {
        {"search.epochs", "40"},
        {"search.batch_size", "64"},
        {"search.w_lr", "0.005"},
        {"search.w_momentum", "0.9"},
        {"search.w_decay", "0.0003"},
        {"search.alpha_lr", "0.0003"},
        {"search.alpha_decay", "0.001"},
        {"search.grad_clip", "5"},
        {"search.seed", "1"},
        {"retrain.epochs", "600"},
        {"retrain.batch_size", "64"},
        {"retrain.w_lr", "0.0025"},
        {"retrain.w_momentum", "0.9"},
        {"retrain.w_decay", "0.0003"},
        {"retrain.init_channels", "64"},
        {"retrain.layers", "5"},
        {"retrain.seed", "1"},
        {"macro.layers", "5"},
        {"macro.init_channels", "16"},
        {"macro.time_window", "2"},
        {"macro.nodes", "4"},
        {"macro.reductions", "auto"},
        {"macro.aux_after", "auto"},
        {"macro.aux_weight", "0.4"},
        {"macro.aux_enabled", "true"},
        {"macro.attention", "off"},
        {"macro.attention_every_cell", "false"},
        {"macro.attention_reduction", "64"},
        {"macro.tau", "0.2"},
        {"macro.vth", "0.5"},
        {"macro.surrogate_width", "1"},
        {"data.format", "synth"},
        {"data.path", ""},
        {"data.stats", ""},
        {"data.synth_classes", "4"},
        {"data.synth_per_class", "500"},
        {"data.synth_size", "16"},
        {"data.synth_noise", "0.2"},
        {"data.synth_seed", "7"},
    };
    return kDefaults;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

const char* prov_name(Provenance p) {
    switch (p) {
        case Provenance::file: return "file";
        case Provenance::flag: return "flag";
        default: return "default";
    }
}

}  // namespace

RunConfig RunConfig::defaults() {
    RunConfig c;
    for (const auto& [k, v] : default_entries()) {
        c.values_[k] = v;
        c.prov_[k] = Provenance::def;
    }
    return c;
}

void RunConfig::set(const std::string& key, const std::string& value, Provenance p) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key: '" + key + "'");
    it->second = value;
    prov_[key] = p;
}

void RunConfig::apply_file(const std::string& path) {
    apply_file_text(read_file(path), path);
}

void RunConfig::apply_file_text(const std::string& text, const std::string& origin) {
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        set(key, value, Provenance::file);
    }
}

void RunConfig::set_flag(const std::string& key, const std::string& value) {
    set(key, value, Provenance::flag);
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) != 0; }

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key: '" + key + "'");
    return it->second;
}

std::int64_t RunConfig::get_int(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t pos = 0;
        const std::int64_t r = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
    }
}

double RunConfig::get_real(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
    }
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<dim_t> RunConfig::get_int_list(const std::string& key) const {
    const std::string& v = get(key);
    std::vector<dim_t> out;
    if (v.empty() || v == "auto") return out;
    std::istringstream is(v);
    std::string cell;
    while (std::getline(is, cell, ',')) {
        cell = trim(cell);
        try {
            out.push_back(dim_t(std::stoll(cell)));
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': '" + cell + "' is not an integer");
        }
    }
    return out;
}

Provenance RunConfig::provenance(const std::string& key) const {
    auto it = prov_.find(key);
    if (it == prov_.end()) throw ConfigError("unknown config key: '" + key + "'");
    return it->second;
}

std::string RunConfig::echo() const {
    std::string out = "# resolved run configuration\n";
    for (const auto& [k, v] : values_)
        out += k + " = " + v + "  # " + prov_name(prov_.at(k)) + "\n";
    return out;
}

SearchConfig RunConfig::search_config() const {
    SearchConfig c;
    c.epochs = get_int("search.epochs");
    c.batch_size = get_int("search.batch_size");
    c.w_lr = get_real("search.w_lr");
    c.w_momentum = get_real("search.w_momentum");
    c.w_decay = get_real("search.w_decay");
    c.alpha_lr = get_real("search.alpha_lr");
    c.alpha_decay = get_real("search.alpha_decay");
    c.grad_clip = get_real("search.grad_clip");
    c.seed = std::uint64_t(get_int("search.seed"));
    c.validate();
    return c;
}

RetrainConfig RunConfig::retrain_config() const {
    RetrainConfig c;
    c.epochs = get_int("retrain.epochs");
    c.batch_size = get_int("retrain.batch_size");
    c.w_lr = get_real("retrain.w_lr");
    c.w_momentum = get_real("retrain.w_momentum");
    c.w_decay = get_real("retrain.w_decay");
    c.seed = std::uint64_t(get_int("retrain.seed"));
    c.validate();
    return c;
}

MacroConfig RunConfig::macro_config(dim_t classes, dim_t in_channels, bool retrain_stage) const {
    MacroConfig m;
    m.layers = retrain_stage ? get_int("retrain.layers") : get_int("macro.layers");
    m.init_channels =
        retrain_stage ? get_int("retrain.init_channels") : get_int("macro.init_channels");
    m.in_channels = in_channels;
    m.classes = classes;
    m.time_window = get_int("macro.time_window");
    m.nodes = get_int("macro.nodes");
    m.reduction_positions = get_int_list("macro.reductions");
    m.aux_after = get("macro.aux_after") == "auto" ? -1 : get_int("macro.aux_after");
    m.aux_weight = get_real("macro.aux_weight");
    m.aux_enabled = get_bool("macro.aux_enabled");
    m.attention = attention_from_string(get("macro.attention"));
    m.attention_every_cell = get_bool("macro.attention_every_cell");
    m.attention_reduction = get_int("macro.attention_reduction");
    m.lif_tau = get_real("macro.tau");
    m.lif_vth = get_real("macro.vth");
    m.lif_surrogate_width = get_real("macro.surrogate_width");
    m.validate();
    return m;
}

ImageDataset RunConfig::load_data() const {
    const std::string& format = get("data.format");
    if (format == "synth") {
        return synthetic_gen(get_int("data.synth_classes"), get_int("data.synth_per_class"),
                             get_int("data.synth_size"), get_real("data.synth_noise"),
                             std::uint64_t(get_int("data.synth_seed")));
    }
    const std::string& path = get("data.path");
    if (path.empty())
        throw ConfigError("data.path is required for data.format=" + format);
    if (format == "raw") return load_dataset(path, DatasetFormat::raw_binary);
    if (format == "csv") return load_dataset(path, DatasetFormat::csv);
    throw ConfigError("data.format must be synth|raw|csv, got '" + format + "'");
}

bool RunConfig::has_stats_override() const { return !get("data.stats").empty(); }

ChannelStats RunConfig::stats_override() const { return load_stats(get("data.stats")); }

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write '" + tmp + "'");
        f.write(content.data(), std::streamsize(content.size()));
        if (!f.good()) throw IoError("write failed for '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw IoError("cannot rename '" + tmp + "' to '" + path + "'");
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

}  // namespace spikenas
