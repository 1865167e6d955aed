#include "matte/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace matte {

namespace {

constexpr char kMagic[4] = {'M', 'T', 'L', 'T'};

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                 char((v >> 24) & 0xff)};
    out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

void put_floats(std::ostream& out, const std::vector<float>& v) {
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * 4));
}

std::vector<float> get_floats(std::istream& in, std::size_t n) {
    std::vector<float> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 4));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor data");
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    std::uint32_t n = get_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw std::runtime_error("checkpoint: truncated string");
    return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write '" + path + "'");
    out.write(kMagic, 4);
    put_u32(out, ck.version);
    put_string(out, ck.config_json);
    put_u32(out, static_cast<std::uint32_t>(ck.tensors.size()));
    for (const auto& [name, t] : ck.tensors) {
        put_string(out, name);
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (int d = 0; d < t.rank(); ++d) put_u32(out, static_cast<std::uint32_t>(t.dim(d)));
        put_floats(out, t.values());
    }
    put_u32(out, static_cast<std::uint32_t>(ck.optimizer_state.size()));
    for (const auto& [name, v] : ck.optimizer_state) {
        put_string(out, name);
        put_u32(out, static_cast<std::uint32_t>(v.size()));
        put_floats(out, v);
    }
    if (!out) throw std::runtime_error("checkpoint: write failure on '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != std::string(kMagic, 4))
        throw std::runtime_error("checkpoint: '" + path + "' has wrong magic bytes");
    Checkpoint ck;
    ck.version = get_u32(in);
    if (ck.version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " +
                                 std::to_string(ck.version));
    ck.config_json = get_string(in);
    std::uint32_t nt = get_u32(in);
    ck.tensors.reserve(nt);
    for (std::uint32_t i = 0; i < nt; ++i) {
        std::string name = get_string(in);
        std::uint32_t rank = get_u32(in);
        Shape shape(rank);
        std::int64_t numel = 1;
        for (auto& d : shape) {
            d = static_cast<int>(get_u32(in));
            numel *= d;
        }
        ck.tensors.emplace_back(std::move(name),
                                Tensor<float>(std::move(shape),
                                              get_floats(in, std::size_t(numel))));
    }
    std::uint32_t no = get_u32(in);
    ck.optimizer_state.reserve(no);
    for (std::uint32_t i = 0; i < no; ++i) {
        std::string name = get_string(in);
        std::uint32_t n = get_u32(in);
        ck.optimizer_state.emplace_back(std::move(name), get_floats(in, n));
    }
    return ck;
}

}  // namespace matte
