#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "bioseg/image.hpp"
#include "bioseg/mask.hpp"
#include "bioseg/rng.hpp"

namespace bioseg {

enum class Domain { source, target };

std::string domain_name(Domain d);
Domain domain_from_name(const std::string& s);

// One training sample: an image patch, its mask and where it came from.
struct PatchRecord {
    ImageF image;       // p x p, values in [0,1]
    BinaryMask mask;    // p x p
    std::string source_id;
    std::pair<int, int> grid_pos{0, 0};
    Domain domain = Domain::target;
};

struct AugmentPolicy {
    double p_hflip = 0.33;
    double p_rot = 0.33;
    std::vector<int> rot_angles = {90, 180, 270};  // drawn uniformly, multiples of 90
    double p_noise = 0.5;
    double noise_max_magnitude = 0.25;  // sigma drawn uniformly from (0, max]
    uint64_t seed = 0;
};

// What augment() actually applied, for policy-rate verification.
struct AugmentOutcome {
    bool hflip = false;
    int rot_degrees = 0;    // 0, 90, 180 or 270
    double noise_sigma = 0;  // 0 when no noise drawn
};

// grid_n^2 non-overlapping patches in row-major order. With centered=true the
// grid covers the central (grid_n*patch)^2 crop, otherwise it anchors at the
// top-left corner.
std::vector<PatchRecord> extract_patch_grid(const ImageF& image, const BinaryMask& mask,
                                            int grid_n, int patch, bool centered,
                                            const std::string& source_id,
                                            Domain domain = Domain::target);

// Keeps records whose mask-positive fraction strictly exceeds min_fraction.
std::vector<PatchRecord> filter_by_label_area(const std::vector<PatchRecord>& records,
                                              double min_fraction = 0.05);

// Independent draws: horizontal flip, rotation by 90/180/270, then Gaussian
// pixel noise on the image only. Geometric ops apply identically to image
// and mask; the image is clipped back to [0,1] after noise.
PatchRecord augment(const PatchRecord& record, const AugmentPolicy& policy, Rng& rng,
                    AugmentOutcome* outcome = nullptr);

// Seeded shuffle then split; val gets max(1, floor(val_fraction*n)) records.
std::pair<std::vector<PatchRecord>, std::vector<PatchRecord>> split_train_val(
    const std::vector<PatchRecord>& records, double val_fraction, uint64_t seed);

// Dataset manifest CSV: image_path,mask_path,domain,source_id. Relative paths
// resolve against the manifest's directory.
struct ManifestEntry {
    std::filesystem::path image_path;
    std::filesystem::path mask_path;
    Domain domain = Domain::target;
    std::string source_id;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& csv_path);
void write_manifest(const std::vector<ManifestEntry>& entries,
                    const std::filesystem::path& csv_path);

// Patch cache: paired "<source>_<row>_<col>.img.pgm" / ".mask.pgm" files.
void write_patch_cache(const std::vector<PatchRecord>& records,
                       const std::filesystem::path& dir);
std::vector<PatchRecord> read_patch_cache(const std::filesystem::path& dir);

}  // namespace bioseg
