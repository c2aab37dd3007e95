#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trer/retrieval.hpp"

namespace trer {

enum class RouteKind {
    Circuit,     // closed loop, revisits in the same travel direction
    FigureEight, // crossing lemniscate laps
    Grid,        // serpentine sweep, revisit tail retraces in reverse
};

RouteKind route_from_string(const std::string& name); // throws ConfigError
std::string route_to_string(RouteKind route);

// Synthetic world: poses along a route at ~1 m spacing, descriptors built
// from smooth random projections of position so nearby places get nearby
// descriptors. heading_coupling adds a travel-direction component, which
// makes opposite-direction revisits hard to retrieve.
struct WorldConfig {
    std::string sequence_id = "seq";
    std::size_t n_frames = 4000;
    RouteKind route = RouteKind::Circuit;
    double revisit_fraction = 0.3;  // fraction of frames that revisit
    std::size_t descriptor_dim = 16;
    double feature_bandwidth = 0.15; // 1/m, spatial frequency of features
    double noise_sigma = 0.1;        // per-visit descriptor noise
    double heading_coupling = 0.0;   // 0 = direction-blind descriptors
    std::uint64_t seed = 0;

    void validate(std::size_t k = 25) const; // needs n_frames >= 2k
};

DescriptorDatabase generate_world(const WorldConfig& cfg);

// Dataset file ("TRRD"): magic, u16 version, u32 N, u32 d, u32 id length +
// UTF-8 id, N*3 poses LE f64, N*d descriptors LE f64, N frame ids u32,
// CRC32 of all preceding bytes.
void save_dataset(const DescriptorDatabase& db,
                  const std::filesystem::path& path);
DescriptorDatabase load_dataset(const std::filesystem::path& path);

struct SequenceSplit {
    std::vector<DescriptorDatabase> train;
    DescriptorDatabase test;
};

// Cross-validation split: the named holdout becomes the test sequence, the
// rest train. Throws ConfigError when the holdout id is unknown.
SequenceSplit split_sequences(std::vector<DescriptorDatabase> dbs,
                              const std::string& holdout_id);

} // namespace trer
