#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvcan/matrix.hpp"
#include "mvcan/random.hpp"

namespace mvcan {

class DatasetIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class BadMagicError : public DatasetIoError {
public:
    using DatasetIoError::DatasetIoError;
};
class VersionError : public DatasetIoError {
public:
    using DatasetIoError::DatasetIoError;
};
class TruncatedError : public DatasetIoError {
public:
    using DatasetIoError::DatasetIoError;
};
class LayoutError : public DatasetIoError {
public:
    using DatasetIoError::DatasetIoError;
};

struct ViewInfo {
    std::string name;
    std::size_t width = 0;
    std::string note;
};

struct DatasetManifest {
    std::vector<ViewInfo> views;
    std::size_t cluster_hint = 0;
};

/// V aligned sample matrices (N×D_v each) plus optional ground truth.
/// Row i is the same sample in every view.
struct MultiViewDataset {
    std::vector<Matrix> views;
    std::vector<int> labels;  // empty when has_labels == false
    bool has_labels = false;
    DatasetManifest manifest;

    std::size_t view_count() const { return views.size(); }
    std::size_t sample_count() const { return views.empty() ? 0 : views.front().rows; }

    void check_consistent() const {
        if (views.empty()) throw LayoutError("dataset: no views");
        if (manifest.views.size() != views.size())
            throw LayoutError("dataset: manifest lists " +
                              std::to_string(manifest.views.size()) + " views, data has " +
                              std::to_string(views.size()));
        for (std::size_t v = 0; v < views.size(); ++v) {
            if (views[v].rows != views[0].rows)
                throw LayoutError("dataset: view " + std::to_string(v) + " has " +
                                  std::to_string(views[v].rows) + " rows, view 0 has " +
                                  std::to_string(views[0].rows));
            if (views[v].cols != manifest.views[v].width)
                throw LayoutError("dataset: view " + std::to_string(v) + " width " +
                                  std::to_string(views[v].cols) + " != manifest width " +
                                  std::to_string(manifest.views[v].width));
        }
        if (has_labels && labels.size() != sample_count())
            throw LayoutError("dataset: " + std::to_string(labels.size()) + " labels for " +
                              std::to_string(sample_count()) + " samples");
    }
};

struct SyntheticViewSpec {
    std::size_t width = 0;
    bool informative = true;
    double spacing = 10.0;  // centroid scale for informative views
    double stddev = 1.0;    // within-cluster standard deviation
};

struct SyntheticSpec {
    std::size_t samples = 0;
    std::size_t clusters = 0;
    std::vector<SyntheticViewSpec> views;
    std::uint64_t seed = 0;
};

/// Informative views are isotropic Gaussian mixtures sharing one latent
/// cluster identity per sample across views; noisy views are i.i.d.
/// uniform [0,1] entries with no label signal. Labels are i mod K.
inline MultiViewDataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.samples < spec.clusters)
        throw std::invalid_argument("generate_synthetic: fewer samples than clusters");
    if (spec.clusters < 1 || spec.views.empty())
        throw std::invalid_argument("generate_synthetic: need clusters >= 1 and views");
    for (const auto& vw : spec.views)
        if (vw.informative && vw.spacing <= 0.0)
            throw std::invalid_argument("generate_synthetic: separation must be positive");

    MultiViewDataset ds;
    ds.has_labels = true;
    ds.labels.resize(spec.samples);
    for (std::size_t i = 0; i < spec.samples; ++i)
        ds.labels[i] = static_cast<int>(i % spec.clusters);
    ds.manifest.cluster_hint = spec.clusters;

    for (std::size_t v = 0; v < spec.views.size(); ++v) {
        const SyntheticViewSpec& vw = spec.views[v];
        Rng rng(derive_seed(spec.seed, 0x5d41, v));
        Matrix x(spec.samples, vw.width);
        ViewInfo info;
        info.width = vw.width;
        if (vw.informative) {
            Matrix centers(spec.clusters, vw.width);
            for (double& c : centers.data) c = vw.spacing * uniform01(rng);
            for (std::size_t i = 0; i < spec.samples; ++i) {
                const double* c = centers.row_ptr(ds.labels[i]);
                double* r = x.row_ptr(i);
                for (std::size_t j = 0; j < vw.width; ++j)
                    r[j] = c[j] + vw.stddev * gaussian(rng);
            }
            info.name = "informative" + std::to_string(v);
            info.note = "gaussian mixture, spacing " + std::to_string(vw.spacing) +
                        ", stddev " + std::to_string(vw.stddev);
        } else {
            for (double& e : x.data) e = uniform01(rng);
            info.name = "noise" + std::to_string(v);
            info.note = "uniform noise, no label signal";
        }
        ds.views.push_back(std::move(x));
        ds.manifest.views.push_back(std::move(info));
    }
    ds.check_consistent();
    return ds;
}

/// Appends one uniform-noise view; existing views are untouched.
inline MultiViewDataset inject_noise_view(const MultiViewDataset& ds, std::size_t width,
                                          std::uint64_t seed) {
    if (width < 1) throw std::invalid_argument("inject_noise_view: width must be >= 1");
    MultiViewDataset out = ds;
    Rng rng(derive_seed(seed, 0x6e01, ds.view_count()));
    Matrix noise(ds.sample_count(), width);
    for (double& e : noise.data) e = uniform01(rng);
    out.views.push_back(std::move(noise));
    ViewInfo info;
    info.name = "noise" + std::to_string(ds.view_count());
    info.width = width;
    info.note = "injected uniform noise view";
    out.manifest.views.push_back(std::move(info));
    out.check_consistent();
    return out;
}

/// Per-feature min-max scaling to [0,1]; constant features map to 0.
inline MultiViewDataset normalize_unit_range(const MultiViewDataset& ds) {
    MultiViewDataset out = ds;
    for (Matrix& x : out.views) {
        require_finite(x, "normalize");
        for (std::size_t j = 0; j < x.cols; ++j) {
            double lo = x(0, j), hi = x(0, j);
            for (std::size_t i = 1; i < x.rows; ++i) {
                lo = std::min(lo, x(i, j));
                hi = std::max(hi, x(i, j));
            }
            const double range = hi - lo;
            for (std::size_t i = 0; i < x.rows; ++i)
                x(i, j) = range > 0.0 ? (x(i, j) - lo) / range : 0.0;
        }
    }
    return out;
}

namespace detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (is.gcount() != 8) throw TruncatedError("dataset file: truncated header field");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void write_f64_block(std::ostream& os, const std::vector<double>& data) {
    for (double d : data) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, 8);
        write_u64(os, bits);
    }
}

inline void read_f64_block(std::istream& is, std::vector<double>& data, std::size_t count) {
    data.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t bits = read_u64(is);
        std::memcpy(&data[i], &bits, 8);
    }
}

}  // namespace detail

inline constexpr char kDatasetMagic[4] = {'M', 'V', 'D', 'S'};
inline constexpr std::uint64_t kDatasetVersion = 1;

/// Layout: magic "MVDS", u64 version, V, N, K-hint, V widths, labels
/// flag (all u64 LE); per-view row-major f64 LE blocks; optional labels
/// as u64 ids; trailing length-prefixed JSON with view names/notes.
inline void save_dataset(const MultiViewDataset& ds, const std::filesystem::path& path) {
    ds.check_consistent();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DatasetIoError("cannot open " + path.string() + " for writing");
    os.write(kDatasetMagic, 4);
    detail::write_u64(os, kDatasetVersion);
    detail::write_u64(os, ds.view_count());
    detail::write_u64(os, ds.sample_count());
    detail::write_u64(os, ds.manifest.cluster_hint);
    for (const Matrix& v : ds.views) detail::write_u64(os, v.cols);
    detail::write_u64(os, ds.has_labels ? 1 : 0);
    for (const Matrix& v : ds.views) detail::write_f64_block(os, v.data);
    if (ds.has_labels)
        for (int l : ds.labels) detail::write_u64(os, static_cast<std::uint64_t>(l));
    nlohmann::json meta;
    for (const ViewInfo& info : ds.manifest.views)
        meta["views"].push_back({{"name", info.name}, {"note", info.note}});
    const std::string text = meta.dump();
    detail::write_u64(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!os) throw DatasetIoError("write failed for " + path.string());
}

inline MultiViewDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DatasetIoError("cannot open " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kDatasetMagic, 4) != 0)
        throw BadMagicError("not a dataset file: " + path.string());
    const std::uint64_t version = detail::read_u64(is);
    if (version != kDatasetVersion)
        throw VersionError("dataset version " + std::to_string(version) + ", expected " +
                           std::to_string(kDatasetVersion));
    const std::uint64_t nviews = detail::read_u64(is);
    const std::uint64_t nsamples = detail::read_u64(is);
    const std::uint64_t khint = detail::read_u64(is);
    if (nviews == 0 || nviews > 1024) throw LayoutError("dataset: implausible view count");
    std::vector<std::uint64_t> widths(nviews);
    for (auto& w : widths) w = detail::read_u64(is);
    const std::uint64_t labels_flag = detail::read_u64(is);
    if (labels_flag > 1) throw LayoutError("dataset: bad labels flag");

    MultiViewDataset ds;
    ds.manifest.cluster_hint = khint;
    for (std::uint64_t v = 0; v < nviews; ++v) {
        Matrix x(nsamples, widths[v]);
        detail::read_f64_block(is, x.data, nsamples * widths[v]);
        ds.views.push_back(std::move(x));
        ds.manifest.views.push_back({"view" + std::to_string(v), widths[v], ""});
    }
    ds.has_labels = labels_flag == 1;
    if (ds.has_labels) {
        ds.labels.resize(nsamples);
        for (auto& l : ds.labels) l = static_cast<int>(detail::read_u64(is));
    }
    const std::uint64_t meta_len = detail::read_u64(is);
    std::string text(meta_len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(meta_len));
    if (is.gcount() != static_cast<std::streamsize>(meta_len))
        throw TruncatedError("dataset file: truncated manifest");
    const nlohmann::json meta = nlohmann::json::parse(text, nullptr, false);
    if (!meta.is_discarded() && meta.contains("views")) {
        if (meta["views"].size() != nviews)
            throw LayoutError("dataset: manifest lists " +
                              std::to_string(meta["views"].size()) + " views, header has " +
                              std::to_string(nviews));
        for (std::uint64_t v = 0; v < nviews; ++v) {
            ds.manifest.views[v].name = meta["views"][v].value("name", ds.manifest.views[v].name);
            ds.manifest.views[v].note = meta["views"][v].value("note", "");
        }
    }
    ds.check_consistent();
    return ds;
}

/// Human-readable manifest dump.
inline std::string manifest_text(const MultiViewDataset& ds) {
    std::string out;
    out += "samples: " + std::to_string(ds.sample_count()) + "\n";
    out += "views: " + std::to_string(ds.view_count()) + "\n";
    out += "cluster_hint: " + std::to_string(ds.manifest.cluster_hint) + "\n";
    out += "labels: " + std::string(ds.has_labels ? "present" : "absent") + "\n";
    for (std::size_t v = 0; v < ds.view_count(); ++v) {
        const ViewInfo& info = ds.manifest.views[v];
        out += "  view " + std::to_string(v) + ": " + info.name + ", width " +
               std::to_string(info.width);
        if (!info.note.empty()) out += " (" + info.note + ")";
        out += "\n";
    }
    return out;
}

}  // namespace mvcan
