#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mif/core/mat.hpp"

namespace mif {

// On-disk tensor container. Layout, byte exact:
//   bytes 0..3   magic "MIFT"
//   bytes 4..7   header length, uint32 little-endian
//   header       JSON {"dtype":"f32","shape":[...],"layout":"row-major","endian":"little"}
//   payload      product(shape) float32 values, little-endian
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    std::size_t element_count() const {
        std::size_t n = 1;
        for (int d : shape) n *= std::size_t(d);
        return n;
    }
};

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is, const std::string& context);

void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

// Mat round trips through a rank-2 tensor (f32 storage).
Tensor tensor_from_mat(const Mat& m);
Mat mat_from_tensor(const Tensor& t, const std::string& context);

}  // namespace mif
