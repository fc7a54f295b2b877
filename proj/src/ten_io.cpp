#include "kdpose/ten_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <memory>

namespace kdpose {

static_assert(std::endian::native == std::endian::little,
              "TEN1 I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'T', 'E', 'N', '1'};
constexpr std::size_t kMaxRank = 8;

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) raise(ErrorCode::io, "cannot open " + path);
    return f;
}

template <typename T>
constexpr std::uint8_t dtype_code() {
    return std::is_same_v<T, float> ? 1 : 2;
}

void read_exact(std::FILE* f, void* dst, std::size_t n, const std::string& path) {
    if (std::fread(dst, 1, n, f) != n)
        raise(ErrorCode::parse, "truncated tensor file " + path);
}

} // namespace

template <typename T>
void write_tensor(const Tensor<T>& tensor, const std::string& path) {
    FilePtr f = open_file(path, "wb");
    std::fwrite(kMagic, 1, 4, f.get());
    const std::uint8_t code = dtype_code<T>();
    const std::uint8_t rank = static_cast<std::uint8_t>(tensor.rank());
    std::fwrite(&code, 1, 1, f.get());
    std::fwrite(&rank, 1, 1, f.get());
    for (const std::size_t d : tensor.shape()) {
        const std::uint64_t d64 = d;
        std::fwrite(&d64, sizeof(d64), 1, f.get());
    }
    const std::size_t written =
        std::fwrite(tensor.data(), sizeof(T), tensor.numel(), f.get());
    if (written != tensor.numel() || std::fflush(f.get()) != 0)
        raise(ErrorCode::io, "short write to " + path);
}

namespace {

template <typename Stored, typename T>
Tensor<T> read_payload(std::FILE* f, std::vector<std::size_t> shape, const std::string& path) {
    Tensor<Stored> raw(std::move(shape));
    read_exact(f, raw.data(), raw.numel() * sizeof(Stored), path);
    // Reject trailing garbage.
    char extra;
    if (std::fread(&extra, 1, 1, f) != 0)
        raise(ErrorCode::parse, "trailing bytes in tensor file " + path);
    if constexpr (std::is_same_v<Stored, T>)
        return raw;
    else
        return raw.template cast<T>();
}

} // namespace

template <typename T>
Tensor<T> read_tensor(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    char magic[4];
    read_exact(f.get(), magic, 4, path);
    if (std::memcmp(magic, kMagic, 4) != 0)
        raise(ErrorCode::parse, "bad magic in tensor file " + path);
    std::uint8_t code = 0, rank = 0;
    read_exact(f.get(), &code, 1, path);
    read_exact(f.get(), &rank, 1, path);
    if (code != 1 && code != 2)
        raise(ErrorCode::parse, "unknown dtype code in " + path);
    if (rank == 0 || rank > kMaxRank)
        raise(ErrorCode::parse, "unsupported rank in " + path);
    std::vector<std::size_t> shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
        std::uint64_t d64 = 0;
        read_exact(f.get(), &d64, sizeof(d64), path);
        if (d64 == 0 || d64 > (1ull << 32))
            raise(ErrorCode::parse, "implausible dim in " + path);
        d = static_cast<std::size_t>(d64);
        numel *= d;
        if (numel > (1ull << 34))
            raise(ErrorCode::parse, "implausible element count in " + path);
    }
    if (code == 1)
        return read_payload<float, T>(f.get(), std::move(shape), path);
    return read_payload<double, T>(f.get(), std::move(shape), path);
}

int peek_tensor_dtype(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    char magic[4];
    read_exact(f.get(), magic, 4, path);
    if (std::memcmp(magic, kMagic, 4) != 0)
        raise(ErrorCode::parse, "bad magic in tensor file " + path);
    std::uint8_t code = 0;
    read_exact(f.get(), &code, 1, path);
    return code;
}

template void write_tensor<float>(const Tensor<float>&, const std::string&);
template void write_tensor<double>(const Tensor<double>&, const std::string&);
template Tensor<float> read_tensor<float>(const std::string&);
template Tensor<double> read_tensor<double>(const std::string&);

} // namespace kdpose
