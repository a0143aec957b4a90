#include "spikenas/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "spikenas/error.hpp"

namespace spikenas {

namespace {

constexpr char kMagic[4] = {'S', 'N', 'C', 'K'};
constexpr std::uint16_t kVersion = 1;

template <class V>
void write_le(std::ostream& os, V v) {
    unsigned char buf[sizeof(V)];
    for (std::size_t i = 0; i < sizeof(V); ++i) buf[i] = (unsigned char)((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(buf), sizeof(V));
}

template <class V>
V read_le(std::istream& is, const char* what) {
    unsigned char buf[sizeof(V)];
    is.read(reinterpret_cast<char*>(buf), sizeof(V));
    if (!is.good()) throw IoError(std::string("checkpoint: truncated reading ") + what);
    V v = 0;
    for (std::size_t i = 0; i < sizeof(V); ++i) v |= V(buf[i]) << (8 * i);
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_le<std::uint32_t>(os, std::uint32_t(s.size()));
    os.write(s.data(), std::streamsize(s.size()));
}

std::string read_string(std::istream& is, const char* what) {
    const auto len = read_le<std::uint32_t>(is, what);
    std::string s(len, '\0');
    is.read(s.data(), std::streamsize(len));
    if (!is.good()) throw IoError(std::string("checkpoint: truncated reading ") + what);
    return s;
}

}  // namespace

template <class T>
Checkpoint make_checkpoint(const ParamStore<T>& store, const std::string& config_echo,
                           const std::string& genotype_text) {
    Checkpoint ck;
    ck.config_echo = config_echo;
    ck.genotype_text = genotype_text;
    auto put = [&](const Parameter<T>& p, std::uint8_t role) {
        CheckpointBlob blob;
        blob.role = role;
        blob.shape = p.tensor.shape();
        blob.data.assign(p.tensor.data(), p.tensor.data() + p.tensor.size());
        ck.blobs[p.name] = std::move(blob);
    };
    for (const auto& p : store.params) put(p, p.role == Role::alpha ? 1 : 0);
    for (const auto& b : store.buffers) put(b, 2);
    return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path, int scalar_width) {
    check_shape(scalar_width == 4 || scalar_width == 8, "checkpoint: scalar width must be 4 or 8");
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("checkpoint: cannot write '" + tmp + "'");
        f.write(kMagic, 4);
        write_le<std::uint16_t>(f, kVersion);
        f.put(char(scalar_width));
        write_string(f, ck.config_echo);
        write_string(f, ck.genotype_text);
        write_le<std::uint32_t>(f, std::uint32_t(ck.blobs.size()));
        for (const auto& [name, blob] : ck.blobs) {
            write_string(f, name);
            f.put(char(blob.role));
            for (dim_t d : {blob.shape.n, blob.shape.c, blob.shape.h, blob.shape.w, blob.shape.t})
                write_le<std::uint64_t>(f, std::uint64_t(d));
            if (scalar_width == 8) {
                f.write(reinterpret_cast<const char*>(blob.data.data()),
                        std::streamsize(blob.data.size() * 8));
            } else {
                std::vector<float> narrow(blob.data.begin(), blob.data.end());
                f.write(reinterpret_cast<const char*>(narrow.data()),
                        std::streamsize(narrow.size() * 4));
            }
        }
        if (!f.good()) throw IoError("checkpoint: write failed for '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw IoError("checkpoint: cannot rename '" + tmp + "' to '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("checkpoint: cannot open '" + path + "'");
    char magic[4];
    f.read(magic, 4);
    if (!f.good() || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("checkpoint: bad magic in '" + path + "' (expected SNCK)");
    const auto version = read_le<std::uint16_t>(f, "version");
    if (version != kVersion)
        throw IoError("checkpoint: format version " + std::to_string(version) +
                      " does not match supported version " + std::to_string(kVersion));
    const int width = f.get();
    if (width != 4 && width != 8) throw IoError("checkpoint: bad scalar width");
    Checkpoint ck;
    ck.config_echo = read_string(f, "config echo");
    ck.genotype_text = read_string(f, "genotype");
    const auto count = read_le<std::uint32_t>(f, "blob count");
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = read_string(f, "blob name");
        CheckpointBlob blob;
        blob.role = std::uint8_t(f.get());
        std::uint64_t dims[5];
        for (auto& d : dims) d = read_le<std::uint64_t>(f, "shape");
        blob.shape = {dim_t(dims[0]), dim_t(dims[1]), dim_t(dims[2]), dim_t(dims[3]),
                      dim_t(dims[4])};
        const std::size_t n = std::size_t(blob.shape.numel());
        blob.data.resize(n);
        if (width == 8) {
            f.read(reinterpret_cast<char*>(blob.data.data()), std::streamsize(n * 8));
        } else {
            std::vector<float> narrow(n);
            f.read(reinterpret_cast<char*>(narrow.data()), std::streamsize(n * 4));
            for (std::size_t j = 0; j < n; ++j) blob.data[j] = double(narrow[j]);
        }
        if (!f.good()) throw IoError("checkpoint: truncated blob '" + name + "'");
        ck.blobs[name] = std::move(blob);
    }
    return ck;
}

template <class T>
void restore_params(ParamStore<T>& store, const Checkpoint& ck) {
    auto restore = [&](Parameter<T>& p) {
        auto it = ck.blobs.find(p.name);
        if (it == ck.blobs.end())
            throw IoError("checkpoint: missing blob '" + p.name + "'");
        if (!(it->second.shape == p.tensor.shape()))
            throw IoError("checkpoint: blob '" + p.name + "' has shape " + it->second.shape.str() +
                          ", model expects " + p.tensor.shape().str());
        for (std::size_t i = 0; i < p.tensor.size(); ++i)
            p.tensor.data()[i] = T(it->second.data[i]);
    };
    for (auto& p : store.params) restore(p);
    for (auto& b : store.buffers) restore(b);
}

template Checkpoint make_checkpoint<float>(const ParamStore<float>&, const std::string&,
                                           const std::string&);
template Checkpoint make_checkpoint<double>(const ParamStore<double>&, const std::string&,
                                            const std::string&);
template void restore_params<float>(ParamStore<float>&, const Checkpoint&);
template void restore_params<double>(ParamStore<double>&, const Checkpoint&);

}  // namespace spikenas
