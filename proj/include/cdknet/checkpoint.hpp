#pragma once

#include <cstdint>
#include <string>

#include "cdknet/network.hpp"

namespace cdknet {

// Versioned JSON checkpoint: layer specs, row-major weights, biases, and
// the seed the network was built/trained under. Doubles are emitted as
// shortest round-trip decimals, so write -> read reproduces every weight
// bit-exactly.
struct Checkpoint {
    FeatureExtractor extractor;
    ClassifierHead head;
    std::uint64_t seed = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

// Throws MissingArtifact when the file does not exist, FormatError on a
// malformed or wrong-version document.
Checkpoint load_checkpoint(const std::string& path);

// Write-to-temp-then-rename so readers never observe a partial file.
void atomic_write_text(const std::string& path, const std::string& contents);

}  // namespace cdknet
