#include "sedm/nn/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sedm::nn {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'D', 'M', 'C', 'K', 'P', '1'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
}

template <typename T>
void write_vec(std::ostream& os, const std::vector<T>& v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
void read_vec(std::istream& is, std::vector<T>& v, std::size_t n) {
    v.resize(n);
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(T)));
    if (!is) throw std::runtime_error("checkpoint: truncated parameter blob");
}

}  // namespace

void save_checkpoint(const std::string& path, const DetectorParams<float>& params,
                     const AdamState& adam) {
    // write-temp-then-rename so a crash never leaves a half-written checkpoint
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("checkpoint: cannot open " + tmp);
        os.write(kMagic, sizeof(kMagic));
        const std::string arch = kArchDescriptor;
        write_pod(os, static_cast<std::uint32_t>(arch.size()));
        os.write(arch.data(), static_cast<std::streamsize>(arch.size()));

        auto& mut = const_cast<DetectorParams<float>&>(params);
        std::vector<float> learn = flatten_learnables(params);
        std::vector<float> buf;
        for (auto& r : buffer_refs(mut)) buf.insert(buf.end(), r.vec->begin(), r.vec->end());

        write_pod(os, static_cast<std::uint64_t>(learn.size()));
        write_pod(os, static_cast<std::uint64_t>(buf.size()));
        write_vec(os, learn);
        write_vec(os, buf);
        write_pod(os, static_cast<std::uint64_t>(adam.step));
        write_vec(os, adam.m);
        write_vec(os, adam.v);
        if (!os) throw std::runtime_error("checkpoint: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("checkpoint: rename failed for " + path);
}

void load_checkpoint(const std::string& path, DetectorParams<float>& params,
                     AdamState& adam) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    std::uint32_t arch_len = 0;
    read_pod(is, arch_len);
    std::string arch(arch_len, '\0');
    is.read(arch.data(), arch_len);
    if (!is || arch != kArchDescriptor)
        throw std::runtime_error("checkpoint: architecture mismatch: got '" + arch +
                                 "', expected '" + kArchDescriptor + "'");

    params = DetectorParams<float>::zeros();
    std::uint64_t n_learn = 0, n_buf = 0;
    read_pod(is, n_learn);
    read_pod(is, n_buf);
    if (n_learn != learnable_size(params))
        throw std::runtime_error("checkpoint: learnable count mismatch");
    std::vector<float> learn, buf;
    read_vec(is, learn, n_learn);
    read_vec(is, buf, n_buf);
    load_learnables(params, learn);
    std::size_t off = 0;
    for (auto& r : buffer_refs(params)) {
        if (off + r.vec->size() > buf.size())
            throw std::runtime_error("checkpoint: buffer count mismatch");
        std::copy(buf.begin() + off, buf.begin() + off + r.vec->size(), r.vec->begin());
        off += r.vec->size();
    }
    if (off != buf.size()) throw std::runtime_error("checkpoint: buffer count mismatch");

    std::uint64_t step = 0;
    read_pod(is, step);
    adam.step = step;
    read_vec(is, adam.m, n_learn);
    read_vec(is, adam.v, n_learn);
}

}  // namespace sedm::nn
