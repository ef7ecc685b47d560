#pragma once

#include <string>

#include "oocrel/model.hpp"

namespace oocrel::lm {

// Checkpoint file: magic/version header, config, vocabulary, frozen digest,
// then row-major little-endian float32 parameter blocks in tensor order.
void save_checkpoint(const LanguageModel& model, const std::string& path);
LanguageModel load_checkpoint(const std::string& path);

} // namespace oocrel::lm
