#include "spikenas/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "spikenas/error.hpp"

namespace spikenas {

void ImageDataset::validate() const {
    check_shape(count >= 0 && channels >= 1 && height >= 1 && width >= 1 && classes >= 1,
                "dataset: bad dimensions");
    if (labels.size() != std::size_t(count))
        throw IoError("dataset: " + std::to_string(labels.size()) + " labels for " +
                      std::to_string(count) + " images");
    if (pixels.size() != std::size_t(count) * pixels_per_image())
        throw IoError("dataset: pixel payload has " + std::to_string(pixels.size()) +
                      " bytes, expected " + std::to_string(count * dim_t(pixels_per_image())));
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (dim_t(labels[i]) >= classes)
            throw IoError("dataset: label " + std::to_string(int(labels[i])) + " at index " +
                          std::to_string(i) + " is >= classes (" + std::to_string(classes) + ")");
}

ImageDataset ImageDataset::subset(const std::vector<dim_t>& indices) const {
    ImageDataset out;
    out.channels = channels;
    out.height = height;
    out.width = width;
    out.classes = classes;
    out.name = name;
    out.count = dim_t(indices.size());
    const std::size_t ppi = pixels_per_image();
    out.pixels.resize(indices.size() * ppi);
    out.labels.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const dim_t src = indices[i];
        std::memcpy(out.pixels.data() + i * ppi, pixels.data() + std::size_t(src) * ppi, ppi);
        out.labels[i] = labels[std::size_t(src)];
    }
    return out;
}

// ---------------------------------------------------------------------
// raw binary / csv

namespace {

constexpr char kMagic[4] = {'S', 'S', 'D', 'S'};
constexpr std::uint16_t kVersion = 1;

template <class V>
void write_le(std::ostream& os, V v) {
    unsigned char buf[sizeof(V)];
    for (std::size_t i = 0; i < sizeof(V); ++i) buf[i] = (unsigned char)((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(buf), sizeof(V));
}

template <class V>
V read_le(std::istream& is, const char* what, std::size_t offset) {
    unsigned char buf[sizeof(V)];
    is.read(reinterpret_cast<char*>(buf), sizeof(V));
    if (!is.good())
        throw IoError(std::string("dataset: truncated while reading ") + what + " at byte offset " +
                      std::to_string(offset));
    V v = 0;
    for (std::size_t i = 0; i < sizeof(V); ++i) v |= V(buf[i]) << (8 * i);
    return v;
}

ImageDataset load_raw(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("dataset: cannot open '" + path + "'");
    char magic[4];
    f.read(magic, 4);
    if (!f.good() || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("dataset: bad magic at byte offset 0 in '" + path + "' (expected SSDS)");
    const auto version = read_le<std::uint16_t>(f, "version", 4);
    if (version != kVersion)
        throw IoError("dataset: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kVersion) + ")");
    ImageDataset ds;
    ds.count = dim_t(read_le<std::uint32_t>(f, "count", 6));
    ds.channels = dim_t(read_le<std::uint16_t>(f, "channels", 10));
    ds.height = dim_t(read_le<std::uint16_t>(f, "height", 12));
    ds.width = dim_t(read_le<std::uint16_t>(f, "width", 14));
    ds.classes = dim_t(read_le<std::uint16_t>(f, "classes", 16));
    const std::size_t header = 18;
    ds.labels.resize(std::size_t(ds.count));
    f.read(reinterpret_cast<char*>(ds.labels.data()), std::streamsize(ds.labels.size()));
    if (std::size_t(f.gcount()) != ds.labels.size())
        throw IoError("dataset: truncated label section at byte offset " +
                      std::to_string(header + std::size_t(f.gcount())) + ", expected " +
                      std::to_string(ds.labels.size()) + " labels");
    const std::size_t expected = std::size_t(ds.count) * ds.pixels_per_image();
    ds.pixels.resize(expected);
    f.read(reinterpret_cast<char*>(ds.pixels.data()), std::streamsize(expected));
    if (std::size_t(f.gcount()) != expected)
        throw IoError("dataset: truncated pixel section: expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(f.gcount()) + " (at byte offset " +
                      std::to_string(header + ds.labels.size() + std::size_t(f.gcount())) + ")");
    char extra;
    if (f.read(&extra, 1))
        throw IoError("dataset: trailing bytes after pixel section in '" + path + "'");
    f.clear();
    ds.validate();
    ds.name = path;
    return ds;
}

void save_raw(const ImageDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("dataset: cannot write '" + path + "'");
    f.write(kMagic, 4);
    write_le<std::uint16_t>(f, kVersion);
    write_le<std::uint32_t>(f, std::uint32_t(ds.count));
    write_le<std::uint16_t>(f, std::uint16_t(ds.channels));
    write_le<std::uint16_t>(f, std::uint16_t(ds.height));
    write_le<std::uint16_t>(f, std::uint16_t(ds.width));
    write_le<std::uint16_t>(f, std::uint16_t(ds.classes));
    f.write(reinterpret_cast<const char*>(ds.labels.data()), std::streamsize(ds.labels.size()));
    f.write(reinterpret_cast<const char*>(ds.pixels.data()), std::streamsize(ds.pixels.size()));
    if (!f.good()) throw IoError("dataset: write failed for '" + path + "'");
}

ImageDataset load_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("dataset: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(f, line)) throw IoError("dataset: empty csv '" + path + "'");
    ImageDataset ds;
    {
        std::istringstream hs(line);
        char comma;
        if (!(hs >> ds.channels >> comma >> ds.height >> comma >> ds.width >> comma >> ds.classes))
            throw IoError("dataset: bad csv header '" + line + "' (want channels,height,width,classes)");
    }
    const std::size_t ppi = ds.pixels_per_image();
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        if (!std::getline(ls, cell, ',')) continue;
        const int label = std::stoi(cell);
        ds.labels.push_back(std::uint8_t(label));
        std::size_t got = 0;
        while (std::getline(ls, cell, ',')) {
            const int v = std::stoi(cell);
            if (v < 0 || v > 255)
                throw IoError("dataset: pixel " + std::to_string(v) + " out of range on line " +
                              std::to_string(lineno));
            ds.pixels.push_back(std::uint8_t(v));
            ++got;
        }
        if (got != ppi)
            throw IoError("dataset: line " + std::to_string(lineno) + " has " +
                          std::to_string(got) + " pixels, expected " + std::to_string(ppi));
        ++ds.count;
    }
    ds.validate();
    ds.name = path;
    return ds;
}

void save_csv(const ImageDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("dataset: cannot write '" + path + "'");
    f << ds.channels << "," << ds.height << "," << ds.width << "," << ds.classes << "\n";
    const std::size_t ppi = ds.pixels_per_image();
    for (dim_t i = 0; i < ds.count; ++i) {
        f << int(ds.labels[std::size_t(i)]);
        for (std::size_t j = 0; j < ppi; ++j)
            f << "," << int(ds.pixels[std::size_t(i) * ppi + j]);
        f << "\n";
    }
}

}  // namespace

ImageDataset load_dataset(const std::string& path, DatasetFormat format) {
    return format == DatasetFormat::raw_binary ? load_raw(path) : load_csv(path);
}

void save_dataset(const ImageDataset& ds, const std::string& path, DatasetFormat format) {
    if (format == DatasetFormat::raw_binary)
        save_raw(ds, path);
    else
        save_csv(ds, path);
}

// ---------------------------------------------------------------------
// splits

std::pair<std::vector<dim_t>, std::vector<dim_t>> split_indices(const ImageDataset& ds,
                                                                const SplitPlan& plan) {
    check_shape(ds.count > 0, "split: empty dataset");
    dim_t ra, rb;
    plan.ratio(ra, rb);
    const double frac_a = double(ra) / double(ra + rb);
    const dim_t total_a = dim_t(std::llround(double(ds.count) * frac_a));
    check_shape(total_a >= 1 && total_a < ds.count,
                "split: ratio " + std::to_string(ra) + ":" + std::to_string(rb) +
                    " infeasible for " + std::to_string(ds.count) + " samples");

    std::vector<std::vector<dim_t>> per_class(std::size_t(ds.classes));
    for (dim_t i = 0; i < ds.count; ++i)
        per_class[ds.labels[std::size_t(i)]].push_back(i);

    Rng rng = Rng::stream(plan.seed, plan.stage == SplitPlan::Stage::search ? 101 : 102);
    for (auto& cls : per_class) rng.shuffle(cls);

    // largest-remainder allocation of part-a slots over classes
    std::vector<dim_t> take(std::size_t(ds.classes));
    std::vector<std::pair<double, dim_t>> rema;
    dim_t assigned = 0;
    for (dim_t c = 0; c < ds.classes; ++c) {
        const double want = double(per_class[std::size_t(c)].size()) * frac_a;
        take[std::size_t(c)] = dim_t(std::floor(want));
        assigned += take[std::size_t(c)];
        rema.push_back({want - std::floor(want), c});
    }
    std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
        return a.first > b.first;  // stable: ties keep lower class index first
    });
    for (std::size_t i = 0; assigned < total_a && i < rema.size(); ++i) {
        const dim_t c = rema[i].second;
        if (take[std::size_t(c)] < dim_t(per_class[std::size_t(c)].size())) {
            ++take[std::size_t(c)];
            ++assigned;
        }
    }
    check_shape(assigned == total_a, "split: allocation failed");

    std::vector<dim_t> a, b;
    for (dim_t c = 0; c < ds.classes; ++c) {
        const auto& cls = per_class[std::size_t(c)];
        for (std::size_t i = 0; i < cls.size(); ++i)
            (dim_t(i) < take[std::size_t(c)] ? a : b).push_back(cls[i]);
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return {a, b};
}

std::pair<ImageDataset, ImageDataset> split(const ImageDataset& ds, const SplitPlan& plan) {
    auto [ia, ib] = split_indices(ds, plan);
    return {ds.subset(ia), ds.subset(ib)};
}

// ---------------------------------------------------------------------
// synthetic data

namespace {

// Distinct deterministic pattern per class: even classes are oriented
// bars, odd classes are checkerboards, with class-specific frequencies and
// phase offsets keeping every pattern pairwise distinct. Low contrast
// around mid-gray keeps the task easy at zero noise but genuinely hard
// once pixel noise dominates per-pixel evidence.
std::uint8_t pattern_value(dim_t cls, dim_t h, dim_t w) {
    static const int dirs[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
    const dim_t idx = cls / 2;
    bool on;
    if (cls % 2 == 0) {
        const int* d = dirs[idx % 4];
        const dim_t period = 1 + idx / 4;
        const dim_t phase = d[0] * h + d[1] * w + idx;
        const dim_t m = ((phase % (2 * period)) + 2 * period) % (2 * period);
        on = m < period;
    } else {
        const dim_t period = 2 + idx;
        on = ((h / period) + (w / period) + idx) % 2 == 0;
    }
    return on ? 152 : 104;
}

}  // namespace

ImageDataset synthetic_gen(dim_t classes, dim_t per_class, dim_t size, double noise,
                           std::uint64_t seed) {
    check_shape(size >= 8, "synthetic_gen: size must be >= 8");
    check_shape(classes >= 2 && classes <= 256, "synthetic_gen: classes must be in [2,256]");
    ImageDataset ds;
    ds.channels = 3;
    ds.height = ds.width = size;
    ds.classes = classes;
    ds.count = classes * per_class;
    ds.name = "synthetic";
    ds.pixels.resize(std::size_t(ds.count) * ds.pixels_per_image());
    ds.labels.resize(std::size_t(ds.count));
    Rng rng = Rng::stream(seed, 777);
    std::size_t px = 0;
    dim_t img = 0;
    for (dim_t c = 0; c < classes; ++c) {
        for (dim_t i = 0; i < per_class; ++i, ++img) {
            ds.labels[std::size_t(img)] = std::uint8_t(c);
            for (dim_t ch = 0; ch < 3; ++ch)
                for (dim_t h = 0; h < size; ++h)
                    for (dim_t w = 0; w < size; ++w) {
                        int v = pattern_value(c, h, w);
                        if (noise > 0) {
                            v += int(std::lround(rng.uniform(-1.0, 1.0) * noise * 255.0));
                            v = std::min(255, std::max(0, v));
                        }
                        ds.pixels[px++] = std::uint8_t(v);
                    }
        }
    }
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------
// normalization and batches

ChannelStats compute_channel_stats(const ImageDataset& ds) {
    ChannelStats s;
    s.mean.assign(std::size_t(ds.channels), 0.0);
    s.stddev.assign(std::size_t(ds.channels), 0.0);
    const std::size_t hw = std::size_t(ds.height * ds.width);
    const std::size_t ppi = ds.pixels_per_image();
    const double n = double(ds.count) * double(hw);
    for (dim_t i = 0; i < ds.count; ++i)
        for (dim_t c = 0; c < ds.channels; ++c) {
            const std::uint8_t* p = ds.pixels.data() + std::size_t(i) * ppi + std::size_t(c) * hw;
            for (std::size_t j = 0; j < hw; ++j) {
                const double v = double(p[j]) / 255.0;
                s.mean[std::size_t(c)] += v;
                s.stddev[std::size_t(c)] += v * v;
            }
        }
    for (dim_t c = 0; c < ds.channels; ++c) {
        s.mean[std::size_t(c)] /= n;
        const double var = s.stddev[std::size_t(c)] / n - s.mean[std::size_t(c)] * s.mean[std::size_t(c)];
        s.stddev[std::size_t(c)] = std::sqrt(std::max(0.0, var));
    }
    return s;
}

void save_stats(const ChannelStats& s, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("stats: cannot write '" + path + "'");
    char buf[64];
    for (std::size_t c = 0; c < s.mean.size(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", s.mean[c], s.stddev[c]);
        f << buf;
    }
}

ChannelStats load_stats(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("stats: cannot open '" + path + "'");
    ChannelStats s;
    double m, sd;
    while (f >> m >> sd) {
        s.mean.push_back(m);
        s.stddev.push_back(sd);
    }
    if (s.mean.empty()) throw IoError("stats: no entries in '" + path + "'");
    return s;
}

template <class T>
Tensor<T> normalize_images(const ImageDataset& ds, const std::vector<dim_t>& indices,
                           const ChannelStats& stats) {
    check_shape(dim_t(stats.mean.size()) == ds.channels && dim_t(stats.stddev.size()) == ds.channels,
                "normalize: stats have " + std::to_string(stats.mean.size()) +
                    " channels, dataset has " + std::to_string(ds.channels));
    for (double sd : stats.stddev) check_shape(sd > 0, "normalize: zero std channel");
    const dim_t n = dim_t(indices.size());
    Tensor<T> out = Tensor<T>::empty({n, ds.channels, ds.height, ds.width, 1});
    const std::size_t hw = std::size_t(ds.height * ds.width);
    const std::size_t ppi = ds.pixels_per_image();
    T* dst = out.data();
    for (dim_t i = 0; i < n; ++i)
        for (dim_t c = 0; c < ds.channels; ++c) {
            const std::uint8_t* p =
                ds.pixels.data() + std::size_t(indices[std::size_t(i)]) * ppi + std::size_t(c) * hw;
            const T mean = T(stats.mean[std::size_t(c)]);
            const T inv = T(1) / T(stats.stddev[std::size_t(c)]);
            for (std::size_t j = 0; j < hw; ++j)
                *dst++ = (T(p[j]) / T(255) - mean) * inv;
        }
    return out;
}

template <class T>
BatchStream<T>::BatchStream(ImageDataset ds, ChannelStats stats, dim_t batch_size,
                            std::uint64_t seed, bool shuffle)
    : ds_(std::move(ds)), stats_(std::move(stats)), batch_size_(batch_size), seed_(seed),
      shuffle_(shuffle) {
    check_shape(batch_size_ >= 1, "batch stream: batch size must be >= 1");
    check_shape(ds_.count >= 1, "batch stream: empty dataset");
}

template <class T>
dim_t BatchStream<T>::batches_per_epoch() const {
    return (ds_.count + batch_size_ - 1) / batch_size_;
}

template <class T>
typename BatchStream<T>::Batch BatchStream<T>::get(dim_t epoch, dim_t index) const {
    check_shape(index >= 0 && index < batches_per_epoch(), "batch stream: index out of range");
    std::vector<dim_t> order(std::size_t(ds_.count));
    for (dim_t i = 0; i < ds_.count; ++i) order[std::size_t(i)] = i;
    if (shuffle_) {
        Rng rng = Rng::stream(seed_, 0xB000 + std::uint64_t(epoch));
        rng.shuffle(order);
    }
    const dim_t begin = index * batch_size_;
    const dim_t end = std::min(begin + batch_size_, ds_.count);
    std::vector<dim_t> idx(order.begin() + begin, order.begin() + end);
    Batch b;
    b.images = normalize_images<T>(ds_, idx, stats_);
    b.labels.reserve(idx.size());
    for (dim_t i : idx) b.labels.push_back(int(ds_.labels[std::size_t(i)]));
    return b;
}

template Tensor<float> normalize_images<float>(const ImageDataset&, const std::vector<dim_t>&,
                                               const ChannelStats&);
template Tensor<double> normalize_images<double>(const ImageDataset&, const std::vector<dim_t>&,
                                                 const ChannelStats&);
template class BatchStream<float>;
template class BatchStream<double>;

}  // namespace spikenas
