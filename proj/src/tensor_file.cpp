#include "mif/core/tensor_file.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mif/core/error.hpp"

namespace mif {

namespace {

constexpr char kMagic[4] = {'M', 'I', 'F', 'T'};

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
    nlohmann::json header;
    header["dtype"] = "f32";
    header["shape"] = t.shape;
    header["layout"] = "row-major";
    header["endian"] = "little";
    const std::string hs = header.dump();
    os.write(kMagic, 4);
    put_u32(os, std::uint32_t(hs.size()));
    os.write(hs.data(), std::streamsize(hs.size()));
    os.write(reinterpret_cast<const char*>(t.data.data()),
             std::streamsize(t.data.size() * sizeof(float)));
}

Tensor read_tensor(std::istream& is, const std::string& context) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError(context + ": bad magic, not a MIFT tensor");
    const std::uint32_t hlen = get_u32(is);
    if (!is || hlen == 0 || hlen > (1u << 20))
        throw FormatError(context + ": implausible header length");
    std::string hs(hlen, '\0');
    is.read(hs.data(), hlen);
    if (!is) throw FormatError(context + ": truncated header");

    nlohmann::json header = nlohmann::json::parse(hs, nullptr, false);
    if (header.is_discarded()) throw FormatError(context + ": header is not valid JSON");
    if (header.value("dtype", "") != "f32")
        throw FormatError(context + ": unsupported dtype '" + header.value("dtype", "") + "'");
    if (header.value("layout", "") != "row-major")
        throw FormatError(context + ": unsupported layout");
    if (header.value("endian", "") != "little")
        throw FormatError(context + ": unsupported endianness");
    if (!header.contains("shape") || !header["shape"].is_array())
        throw FormatError(context + ": missing shape");

    Tensor t;
    for (const auto& d : header["shape"]) {
        if (!d.is_number_integer() || d.get<long long>() <= 0)
            throw FormatError(context + ": non-positive shape entry");
        t.shape.push_back(d.get<int>());
    }
    const std::size_t count = t.element_count();
    t.data.resize(count);
    is.read(reinterpret_cast<char*>(t.data.data()),
            std::streamsize(count * sizeof(float)));
    if (std::size_t(is.gcount()) != count * sizeof(float))
        throw FormatError(context + ": payload shorter than shape requires");
    is.peek();
    if (!is.eof()) throw FormatError(context + ": trailing bytes after payload");
    return t;
}

void save_tensor(const std::string& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    write_tensor(os, t);
    if (!os) throw IoError("write failed: " + path);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    return read_tensor(is, path);
}

Tensor tensor_from_mat(const Mat& m) {
    Tensor t;
    t.shape = {m.rows(), m.cols()};
    t.data.resize(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) t.data[i] = float(m.raw()[i]);
    return t;
}

Mat mat_from_tensor(const Tensor& t, const std::string& context) {
    if (t.shape.size() != 2)
        throw ShapeMismatch(context + ": expected rank-2 tensor, got rank " +
                            std::to_string(t.shape.size()));
    Mat m(t.shape[0], t.shape[1]);
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        if (!std::isfinite(t.data[i]))
            throw NonFiniteData(context + ": non-finite value at index " + std::to_string(i));
        m.raw()[i] = double(t.data[i]);
    }
    return m;
}

}  // namespace mif
