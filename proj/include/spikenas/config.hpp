#pragma once

// Flat key=value run configuration with section prefixes (search., retrain.,
// macro., data.). Flags override file values override defaults; every
// field's provenance is recorded and echoed with the resolved config.

#include <map>
#include <string>
#include <vector>

#include "spikenas/dataset.hpp"
#include "spikenas/network.hpp"
#include "spikenas/train.hpp"

namespace spikenas {

enum class Provenance { def, file, flag };

class RunConfig {
public:
    static RunConfig defaults();

    // Accepts plain "key = value" lines, blank lines, and '#' comments;
    // echoed configs parse back unchanged.
    void apply_file(const std::string& path);
    void apply_file_text(const std::string& text, const std::string& origin);
    void set_flag(const std::string& key, const std::string& value);

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    double get_real(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<dim_t> get_int_list(const std::string& key) const;  // comma separated
    Provenance provenance(const std::string& key) const;

    std::string echo() const;

    SearchConfig search_config() const;
    RetrainConfig retrain_config() const;
    // Macro for the search-stage supernet or the retrain-stage discrete
    // network (which takes channels/layers from retrain.*).
    MacroConfig macro_config(dim_t classes, dim_t in_channels, bool retrain_stage) const;

    ImageDataset load_data() const;
    // Sidecar stats when data.stats is set; nullptr otherwise.
    bool has_stats_override() const;
    ChannelStats stats_override() const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    void set(const std::string& key, const std::string& value, Provenance p);
    std::map<std::string, std::string> values_;
    std::map<std::string, Provenance> prov_;
};

// Writes content to path via a temp file and rename.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace spikenas
