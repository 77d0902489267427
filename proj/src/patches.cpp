#include "bioseg/patches.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace bioseg {

std::string domain_name(Domain d) { return d == Domain::source ? "source" : "target"; }

Domain domain_from_name(const std::string& s) {
    if (s == "source") return Domain::source;
    if (s == "target") return Domain::target;
    throw FormatError("unknown domain '" + s + "' (expected source|target)");
}

std::vector<PatchRecord> extract_patch_grid(const ImageF& image, const BinaryMask& mask,
                                            int grid_n, int patch, bool centered,
                                            const std::string& source_id, Domain domain) {
    if (grid_n < 1 || patch < 1)
        throw ContractViolation("extract_patch_grid: grid_n and patch must be >= 1");
    if (image.height != mask.height || image.width != mask.width)
        throw ContractViolation("extract_patch_grid: image/mask shape mismatch");
    const int need = grid_n * patch;
    if (image.height < need || image.width < need)
        throw ContractViolation("extract_patch_grid: image too small, needs at least " +
                                std::to_string(need) + "x" + std::to_string(need));

    const int off_y = centered ? (image.height - need) / 2 : 0;
    const int off_x = centered ? (image.width - need) / 2 : 0;

    std::vector<PatchRecord> out;
    out.reserve(static_cast<size_t>(grid_n) * grid_n);
    for (int gy = 0; gy < grid_n; ++gy)
        for (int gx = 0; gx < grid_n; ++gx) {
            PatchRecord rec;
            rec.image = ImageF(patch, patch);
            rec.mask = BinaryMask(patch, patch);
            rec.source_id = source_id;
            rec.grid_pos = {gy, gx};
            rec.domain = domain;
            const int y0 = off_y + gy * patch;
            const int x0 = off_x + gx * patch;
            for (int y = 0; y < patch; ++y)
                for (int x = 0; x < patch; ++x) {
                    rec.image.at(y, x) = image.at(y0 + y, x0 + x);
                    rec.mask.at(y, x) = mask.at(y0 + y, x0 + x);
                }
            out.push_back(std::move(rec));
        }
    return out;
}

std::vector<PatchRecord> filter_by_label_area(const std::vector<PatchRecord>& records,
                                              double min_fraction) {
    std::vector<PatchRecord> out;
    for (const PatchRecord& rec : records) {
        const double frac =
            static_cast<double>(rec.mask.count()) / static_cast<double>(rec.mask.size());
        if (frac > min_fraction) out.push_back(rec);  // strictly greater
    }
    return out;
}

PatchRecord augment(const PatchRecord& record, const AugmentPolicy& policy, Rng& rng,
                    AugmentOutcome* outcome) {
    PatchRecord out = record;
    AugmentOutcome applied;

    if (rng.uniform() < policy.p_hflip) {
        out.image = hflip_image(out.image);
        out.mask = hflip_mask(out.mask);
        applied.hflip = true;
    }
    if (!policy.rot_angles.empty() && rng.uniform() < policy.p_rot) {
        const int drawn = policy.rot_angles[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int>(policy.rot_angles.size()) - 1))];
        if (drawn % 90 != 0) throw ContractViolation("augment: rot_angles must be multiples of 90");
        const int angle = ((drawn % 360) + 360) % 360;
        applied.rot_degrees = angle;
        switch (angle) {
            case 0:
                break;
            case 90:
                out.image = rot90_image(out.image);
                out.mask = rot90_mask(out.mask);
                break;
            case 180:
                out.image = rot180_image(out.image);
                out.mask = rot180_mask(out.mask);
                break;
            default:
                out.image = rot270_image(out.image);
                out.mask = rot270_mask(out.mask);
                break;
        }
    }
    if (rng.uniform() < policy.p_noise) {
        // sigma uniform in (0, max]
        const double sigma =
            policy.noise_max_magnitude * (1.0 - rng.uniform());
        applied.noise_sigma = sigma;
        out.image = add_gaussian_noise(out.image, sigma, rng);
    }

    if (outcome) *outcome = applied;
    return out;
}

std::pair<std::vector<PatchRecord>, std::vector<PatchRecord>> split_train_val(
    const std::vector<PatchRecord>& records, double val_fraction, uint64_t seed) {
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw ContractViolation("split_train_val: val_fraction must lie in (0,1)");
    if (records.size() < 2)
        throw ContractViolation("split_train_val: need at least 2 records");

    std::vector<size_t> order(records.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    size_t n_val = static_cast<size_t>(val_fraction * static_cast<double>(records.size()));
    n_val = std::clamp<size_t>(n_val, 1, records.size() - 1);

    std::vector<PatchRecord> val, train;
    val.reserve(n_val);
    train.reserve(records.size() - n_val);
    for (size_t i = 0; i < order.size(); ++i)
        (i < n_val ? val : train).push_back(records[order[i]]);
    return {std::move(train), std::move(val)};
}

// ---------------------------------------------------------------------------
// manifest + patch cache
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    return fields;
}

}  // namespace

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open manifest '" + csv_path.string() + "'");
    const std::filesystem::path base = csv_path.parent_path();

    std::vector<ManifestEntry> out;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "image_path,mask_path,domain,source_id")
                throw FormatError("manifest: expected header "
                                  "'image_path,mask_path,domain,source_id', got '" + line + "'");
            header_seen = true;
            continue;
        }
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 4) throw FormatError("manifest: expected 4 columns in line '" + line + "'");
        ManifestEntry e;
        const std::filesystem::path img(f[0]), msk(f[1]);
        e.image_path = img.is_absolute() ? img : base / img;
        e.mask_path = msk.is_absolute() ? msk : base / msk;
        e.domain = domain_from_name(f[2]);
        e.source_id = f[3];
        out.push_back(std::move(e));
    }
    if (!header_seen) throw FormatError("manifest: missing header row");
    return out;
}

void write_manifest(const std::vector<ManifestEntry>& entries,
                    const std::filesystem::path& csv_path) {
    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) throw IoError("cannot open manifest '" + csv_path.string() + "' for writing");
    out << "image_path,mask_path,domain,source_id\n";
    for (const ManifestEntry& e : entries)
        out << e.image_path.filename().string() << "," << e.mask_path.filename().string() << ","
            << domain_name(e.domain) << "," << e.source_id << "\n";
}

void write_patch_cache(const std::vector<PatchRecord>& records,
                       const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream index(dir / "patches.csv", std::ios::trunc);
    index << "stem,domain,source_id,row,col\n";
    for (const PatchRecord& rec : records) {
        const std::string stem = rec.source_id + "_" + std::to_string(rec.grid_pos.first) + "_" +
                                 std::to_string(rec.grid_pos.second);
        write_pgm(float_to_pgm16(rec.image), dir / (stem + ".img.pgm"));
        write_pgm(mask_to_pgm(rec.mask), dir / (stem + ".mask.pgm"));
        index << stem << "," << domain_name(rec.domain) << "," << rec.source_id << ","
              << rec.grid_pos.first << "," << rec.grid_pos.second << "\n";
    }
}

std::vector<PatchRecord> read_patch_cache(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw IoError("patch cache '" + dir.string() + "' is not a directory");

    // optional index carries the domain tag; the PGM pairs alone are enough
    std::vector<std::pair<std::string, Domain>> domains;
    {
        std::ifstream index(dir / "patches.csv");
        if (index) {
            std::string line;
            std::getline(index, line);  // header
            while (std::getline(index, line)) {
                if (line.empty()) continue;
                const std::vector<std::string> f = split_csv_line(line);
                if (f.size() >= 2) domains.emplace_back(f[0], domain_from_name(f[1]));
            }
        }
    }
    auto domain_of = [&domains](const std::string& stem) {
        for (const auto& [s, d] : domains)
            if (s == stem) return d;
        return Domain::target;
    };

    std::vector<std::filesystem::path> img_files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() > 8 && name.ends_with(".img.pgm")) img_files.push_back(entry.path());
    }
    std::sort(img_files.begin(), img_files.end());

    std::vector<PatchRecord> out;
    for (const std::filesystem::path& img_path : img_files) {
        std::string stem = img_path.filename().string();
        stem.resize(stem.size() - 8);  // drop ".img.pgm"
        const std::filesystem::path mask_path = dir / (stem + ".mask.pgm");
        if (!std::filesystem::exists(mask_path))
            throw IoError("patch cache: missing mask for '" + stem + "'");

        PatchRecord rec;
        rec.image = pgm_to_float(read_pgm(img_path));
        rec.mask = pgm_to_mask(read_pgm(mask_path));
        rec.source_id = stem;
        rec.domain = domain_of(stem);
        // parse trailing _row_col when present
        const size_t c2 = stem.rfind('_');
        if (c2 != std::string::npos) {
            const size_t c1 = stem.rfind('_', c2 - 1);
            if (c1 != std::string::npos) {
                try {
                    rec.grid_pos = {std::stoi(stem.substr(c1 + 1, c2 - c1 - 1)),
                                    std::stoi(stem.substr(c2 + 1))};
                    rec.source_id = stem.substr(0, c1);
                } catch (const std::exception&) {
                    // stem without grid suffix, keep defaults
                }
            }
        }
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace bioseg
