#ifndef UDA_CONFIG_HPP
#define UDA_CONFIG_HPP

#include <string>

#include "uda/trainer.hpp"

namespace uda {

// One "key = value" assignment. Unknown keys and unparsable values are
// config errors naming the key.
void apply_config_entry(TrainConfig& cfg, const std::string& key,
                        const std::string& value);

// Flat key = value file: '#' comment lines, blank lines and [section]
// headers are skipped; every other line must parse. Errors carry the
// 1-based line number. The parsed values overlay cfg in file order.
void apply_config_file(TrainConfig& cfg, const std::string& path);

}  // namespace uda

#endif
