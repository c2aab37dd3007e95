#include "trer/synthdata.hpp"

#include <algorithm>
#include <cmath>

#include "trer/errors.hpp"
#include "trer/rng.hpp"
#include "trer/serialize.hpp"

namespace trer {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::uint16_t kDatasetVersion = 1;
constexpr char kDatasetMagic[4] = {'T', 'R', 'R', 'D'};

// Heading feature frequency scale: order-one variation around the circle.
constexpr double kHeadingBandwidth = 1.5;
constexpr double kGridLaneSpacing = 35.0; // > typical loop threshold

} // namespace

RouteKind route_from_string(const std::string& name) {
    if (name == "circuit") return RouteKind::Circuit;
    if (name == "figure_eight") return RouteKind::FigureEight;
    if (name == "grid") return RouteKind::Grid;
    throw ConfigError("unknown route '" + name +
                      "' (expected circuit, figure_eight or grid)");
}

std::string route_to_string(RouteKind route) {
    switch (route) {
        case RouteKind::Circuit: return "circuit";
        case RouteKind::FigureEight: return "figure_eight";
        case RouteKind::Grid: return "grid";
    }
    return "circuit";
}

void WorldConfig::validate(std::size_t k) const {
    if (sequence_id.empty()) {
        throw ConfigError("world config: sequence_id must not be empty");
    }
    if (n_frames < 2 * k) {
        throw ConfigError("world config: n_frames=" +
                          std::to_string(n_frames) + " must be >= 2k=" +
                          std::to_string(2 * k));
    }
    if (revisit_fraction < 0.0 || revisit_fraction > 1.0) {
        throw ConfigError("world config: revisit_fraction must be in [0, 1]");
    }
    if (descriptor_dim < 1) {
        throw ConfigError("world config: descriptor_dim must be >= 1");
    }
    if (feature_bandwidth < 0.0 || noise_sigma < 0.0) {
        throw ConfigError("world config: feature_bandwidth and noise_sigma "
                          "must be nonnegative");
    }
    if (heading_coupling < 0.0 || heading_coupling > 1.0) {
        throw ConfigError("world config: heading_coupling must be in [0, 1]");
    }
}

namespace {

using Pose = std::array<double, 3>;

// Base path of `length` points at ~1 m spacing for each route shape.
std::vector<Pose> base_path(RouteKind route, std::size_t length) {
    std::vector<Pose> path;
    path.reserve(length);
    switch (route) {
        case RouteKind::Circuit: {
            const double radius =
                static_cast<double>(length) / (2.0 * kPi);
            for (std::size_t i = 0; i < length; ++i) {
                const double t =
                    2.0 * kPi * static_cast<double>(i) /
                    static_cast<double>(length);
                path.push_back({radius * std::cos(t), radius * std::sin(t),
                                0.0});
            }
            break;
        }
        case RouteKind::FigureEight: {
            // Gerono lemniscate x = a cos t, y = a sin t cos t, walked at
            // unit arc-length steps via fine parameter sub-stepping.
            // Perimeter of the unit curve is about 6.0972, so scale a to
            // make the full lap `length` meters.
            const double a = static_cast<double>(length) / 6.0972;
            const double dt = 1e-4;
            double t = 0.0;
            double acc = 0.0;
            auto point = [a](double u) -> Pose {
                return {a * std::cos(u), a * std::sin(u) * std::cos(u), 0.0};
            };
            Pose prev = point(0.0);
            path.push_back(prev);
            while (path.size() < length && t < 2.0 * kPi) {
                t += dt;
                const Pose cur = point(t);
                acc += std::hypot(cur[0] - prev[0], cur[1] - prev[1]);
                prev = cur;
                if (acc >= 1.0) {
                    path.push_back(cur);
                    acc = 0.0;
                }
            }
            while (path.size() < length) { // numeric shortfall, pad the lap
                path.push_back(path.back());
            }
            break;
        }
        case RouteKind::Grid: {
            // Serpentine sweep: lanes along x, connected by short joins.
            const std::size_t lane_len = 400;
            const std::size_t join_len =
                static_cast<std::size_t>(kGridLaneSpacing);
            double x = 0.0;
            double y = 0.0;
            int direction = 1;
            while (path.size() < length) {
                for (std::size_t i = 0; i < lane_len && path.size() < length;
                     ++i) {
                    path.push_back({x, y, 0.0});
                    x += direction;
                }
                for (std::size_t i = 0; i < join_len && path.size() < length;
                     ++i) {
                    path.push_back({x, y, 0.0});
                    y += 1.0;
                }
                direction = -direction;
                x += direction; // step back onto the lane
            }
            break;
        }
    }
    return path;
}

} // namespace

DescriptorDatabase generate_world(const WorldConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.n_frames;
    const std::size_t revisit =
        static_cast<std::size_t>(std::llround(cfg.revisit_fraction *
                                              static_cast<double>(n)));
    const std::size_t base_len = std::max<std::size_t>(2, n - revisit);
    const auto base = base_path(cfg.route, base_len);

    // Trajectory: walk the base path once, then revisit. The grid route
    // retraces its own tail in reverse (opposite travel direction); the
    // closed routes keep lapping forward.
    std::vector<Pose> poses;
    poses.reserve(n);
    for (std::size_t i = 0; i < std::min(n, base_len); ++i) {
        poses.push_back(base[i]);
    }
    if (cfg.route == RouteKind::Grid) {
        std::size_t j = base_len >= 2 ? base_len - 2 : 0;
        while (poses.size() < n) {
            poses.push_back(base[j]);
            j = j > 0 ? j - 1 : 0;
        }
    } else {
        for (std::size_t i = base_len; i < n; ++i) {
            poses.push_back(base[i % base_len]);
        }
    }

    // Headings from forward differences on the final trajectory.
    std::vector<double> headings(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (i + 1 < n) {
            const double dx = poses[i + 1][0] - poses[i][0];
            const double dy = poses[i + 1][1] - poses[i][1];
            headings[i] = (dx == 0.0 && dy == 0.0 && i > 0)
                              ? headings[i - 1]
                              : std::atan2(dy, dx);
        } else {
            headings[i] = n >= 2 ? headings[i - 1] : 0.0;
        }
    }

    // Random projection banks. Position features mostly live at the
    // configured bandwidth; every fourth one is six times coarser, which
    // keeps far-apart places from aliasing whole segments while leaving
    // distances saturated beyond the place scale. Heading features act on
    // the unit travel-direction vector.
    //
    // The banks play the role of the descriptor backbone, so they derive
    // from the seed's high bits: sequences whose seeds share those bits
    // live in one descriptor space (one "backbone"), while the low bits
    // vary the per-visit noise. Cross-sequence training only makes sense
    // inside a shared descriptor space.
    Rng bank_rng(cfg.seed >> 16);
    Rng noise_rng(cfg.seed);
    const std::size_t d = cfg.descriptor_dim;
    std::vector<std::array<double, 2>> pos_freq(d);
    std::vector<double> pos_phase(d);
    std::vector<std::array<double, 2>> head_freq(d);
    std::vector<double> head_phase(d);
    for (std::size_t j = 0; j < d; ++j) {
        const double bw = (j % 4 == 3) ? cfg.feature_bandwidth / 6.0
                                       : cfg.feature_bandwidth;
        pos_freq[j] = {bank_rng.normal() * bw, bank_rng.normal() * bw};
        pos_phase[j] = bank_rng.uniform(0.0, 2.0 * kPi);
        head_freq[j] = {bank_rng.normal() * kHeadingBandwidth,
                        bank_rng.normal() * kHeadingBandwidth};
        head_phase[j] = bank_rng.uniform(0.0, 2.0 * kPi);
    }

    DescriptorDatabase db;
    db.sequence_id = cfg.sequence_id;
    db.poses = poses;
    db.descriptors = Mat(n, d);
    db.frame_ids.resize(n);

    std::vector<double> pos_feat(d);
    std::vector<double> head_feat(d);
    for (std::size_t i = 0; i < n; ++i) {
        db.frame_ids[i] = static_cast<std::uint32_t>(i);
        double pos_norm2 = 0.0;
        double head_norm2 = 0.0;
        const double ux = std::cos(headings[i]);
        const double uy = std::sin(headings[i]);
        for (std::size_t j = 0; j < d; ++j) {
            pos_feat[j] = std::cos(pos_freq[j][0] * poses[i][0] +
                                   pos_freq[j][1] * poses[i][1] +
                                   pos_phase[j]);
            pos_norm2 += pos_feat[j] * pos_feat[j];
            head_feat[j] = std::cos(head_freq[j][0] * ux +
                                    head_freq[j][1] * uy + head_phase[j]);
            head_norm2 += head_feat[j] * head_feat[j];
        }
        const double pos_scale =
            pos_norm2 > 0.0 ? 1.0 / std::sqrt(pos_norm2) : 0.0;
        const double head_scale =
            head_norm2 > 0.0 ? 1.0 / std::sqrt(head_norm2) : 0.0;
        auto row = db.descriptors.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            row[j] = pos_feat[j] * pos_scale +
                     cfg.heading_coupling * head_feat[j] * head_scale +
                     cfg.noise_sigma * noise_rng.normal();
        }
    }
    db.validate();
    return db;
}

void save_dataset(const DescriptorDatabase& db,
                  const std::filesystem::path& path) {
    db.validate();
    ByteWriter w;
    w.str(std::string(kDatasetMagic, 4));
    w.u16(kDatasetVersion);
    w.u32(static_cast<std::uint32_t>(db.size()));
    w.u32(static_cast<std::uint32_t>(db.dim()));
    w.u32(static_cast<std::uint32_t>(db.sequence_id.size()));
    w.str(db.sequence_id);
    for (const auto& pose : db.poses) {
        for (double v : pose) w.f64(v);
    }
    for (double v : db.descriptors.data) w.f64(v);
    for (std::uint32_t id : db.frame_ids) w.u32(id);
    w.u32(crc32(w.buffer()));
    w.write_file(path);
}

DescriptorDatabase load_dataset(const std::filesystem::path& path) {
    ByteReader r = ByteReader::from_file(path);
    if (r.size() < 4 || std::string(reinterpret_cast<const char*>(
                            r.all().data()), 4) != std::string(kDatasetMagic, 4)) {
        throw FormatError("dataset " + path.string() +
                          ": bad magic at offset 0");
    }
    r.str(4);
    const auto version = r.u16();
    if (version != kDatasetVersion) {
        throw FormatError("dataset " + path.string() + ": version " +
                          std::to_string(version) + " not supported");
    }
    const std::uint32_t n = r.u32();
    const std::uint32_t d = r.u32();
    const std::uint32_t id_len = r.u32();

    // Validate the declared sizes against the actual byte count before
    // reading the blocks, so a short file reports truncation, not garbage.
    const std::size_t expected =
        4 + 2 + 4 + 4 + 4 + id_len +
        static_cast<std::size_t>(n) * 3 * 8 +
        static_cast<std::size_t>(n) * d * 8 +
        static_cast<std::size_t>(n) * 4 + 4;
    if (r.size() < expected) {
        throw FormatError("dataset " + path.string() + ": truncated, " +
                          std::to_string(r.size()) + " bytes but header "
                          "declares " + std::to_string(expected));
    }

    DescriptorDatabase db;
    db.sequence_id = r.str(id_len);
    db.poses.resize(n);
    for (auto& pose : db.poses) {
        for (auto& v : pose) v = r.f64();
    }
    db.descriptors = Mat(n, d);
    r.f64_block(db.descriptors.data);
    db.frame_ids.resize(n);
    for (auto& id : db.frame_ids) id = r.u32();

    const std::uint32_t declared = r.u32();
    const std::uint32_t actual =
        crc32({r.all().data(), r.offset() - 4});
    if (declared != actual) {
        throw FormatError("dataset " + path.string() +
                          ": checksum mismatch at offset " +
                          std::to_string(r.offset() - 4));
    }
    db.validate();
    return db;
}

SequenceSplit split_sequences(std::vector<DescriptorDatabase> dbs,
                              const std::string& holdout_id) {
    SequenceSplit split;
    bool found = false;
    for (auto& db : dbs) {
        if (db.sequence_id == holdout_id) {
            if (found) {
                throw ConfigError("split: duplicate sequence id '" +
                                  holdout_id + "'");
            }
            split.test = std::move(db);
            found = true;
        } else {
            split.train.push_back(std::move(db));
        }
    }
    if (!found) {
        throw ConfigError("split: unknown holdout id '" + holdout_id + "'");
    }
    return split;
}

} // namespace trer
