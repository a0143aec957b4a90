#pragma once

// Dataset ingestion, splits, normalization, and the deterministic
// synthetic generator used for desk-scale runs.
//
// Raw binary layout (all integers little-endian):
//   magic "SSDS" | version u16 | count u32 | channels u16 | height u16 |
//   width u16 | classes u16 | labels u8[count] |
//   pixels u8[count*channels*height*width] row-major (image, channel, h, w)
//
// CSV layout (tiny hand-written cases): first line
// "channels,height,width,classes"; each following line is a label followed
// by channels*height*width pixel values in 0..255.

#include <cstdint>
#include <string>
#include <vector>

#include "spikenas/rng.hpp"
#include "spikenas/tensor.hpp"

namespace spikenas {

struct ImageDataset {
    std::vector<std::uint8_t> pixels;  // (count, channels, height, width)
    std::vector<std::uint8_t> labels;
    dim_t count = 0, channels = 0, height = 0, width = 0, classes = 0;
    std::string name;

    void validate() const;
    std::size_t pixels_per_image() const { return std::size_t(channels * height * width); }

    ImageDataset subset(const std::vector<dim_t>& indices) const;
};

enum class DatasetFormat { raw_binary, csv };

ImageDataset load_dataset(const std::string& path, DatasetFormat format);
void save_dataset(const ImageDataset& ds, const std::string& path, DatasetFormat format);

struct SplitPlan {
    enum class Stage { search, retrain };
    Stage stage = Stage::search;
    std::uint64_t seed = 0;

    // search 1:1, retrain 5:1
    void ratio(dim_t& a, dim_t& b) const {
        a = stage == Stage::search ? 1 : 5;
        b = 1;
    }
};

// Seeded, class-stratified partition (each class's proportion holds within
// one sample; part sizes are exact by largest-remainder allocation).
std::pair<std::vector<dim_t>, std::vector<dim_t>> split_indices(const ImageDataset& ds,
                                                                const SplitPlan& plan);
std::pair<ImageDataset, ImageDataset> split(const ImageDataset& ds, const SplitPlan& plan);

// Class-conditional oriented bars/checkerboards at class-specific
// frequencies plus uniform pixel noise. Linearly separable at noise 0.
ImageDataset synthetic_gen(dim_t classes, dim_t per_class, dim_t size, double noise,
                           std::uint64_t seed);

// Per-channel mean/std of pixels/255.
struct ChannelStats {
    std::vector<double> mean, stddev;
};
ChannelStats compute_channel_stats(const ImageDataset& ds);
void save_stats(const ChannelStats& s, const std::string& path);
ChannelStats load_stats(const std::string& path);

// (pixel/255 - mean)/std for one image, written as (1,C,H,W,1)-shaped rows
// of a batch tensor by BatchStream below.
template <class T>
Tensor<T> normalize_images(const ImageDataset& ds, const std::vector<dim_t>& indices,
                           const ChannelStats& stats);

// Deterministic batch access: the order for epoch e is a seeded shuffle of
// the dataset, so get(e, i) is a pure function of (seed, e, i).
template <class T>
class BatchStream {
public:
    struct Batch {
        Tensor<T> images;  // (N,C,H,W,1)
        std::vector<int> labels;
    };

    BatchStream(ImageDataset ds, ChannelStats stats, dim_t batch_size, std::uint64_t seed,
                bool shuffle);

    dim_t batches_per_epoch() const;
    dim_t images_per_epoch() const { return ds_.count; }
    Batch get(dim_t epoch, dim_t index) const;
    const ImageDataset& dataset() const { return ds_; }

private:
    ImageDataset ds_;
    ChannelStats stats_;
    dim_t batch_size_;
    std::uint64_t seed_;
    bool shuffle_;
};

}  // namespace spikenas
