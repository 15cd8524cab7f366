#pragma once

#include <map>
#include <string>
#include <vector>

#include "dvrm/common.hpp"
#include "dvrm/tensor.hpp"

namespace dvrm {

// On-disk array bundle. Layout:
//   bytes 0..7   magic "DVRMBOX1"
//   bytes 8..15  uint64 LE header length H
//   H bytes      JSON header {"arrays":[{"dtype","name","shape"},...],"meta":{...}}
//   rest         concatenated little-endian array payloads in header order
struct ContainerArray {
    std::string name;
    std::string dtype; // "f32" or "f64"
    Shape shape;
    std::vector<float> f32;
    std::vector<double> f64;

    std::size_t numel() const { return shape_numel(shape); }
    std::size_t byte_size() const { return numel() * (dtype == "f64" ? 8 : 4); }
};

struct Container {
    std::map<std::string, std::string> meta;
    std::vector<ContainerArray> arrays;

    void add_f32(const std::string& name, Shape shape, std::vector<float> data);
    void add_f64(const std::string& name, Shape shape, std::vector<double> data);
    bool has(const std::string& name) const;
    const ContainerArray& get(const std::string& name) const;

    // convenience: any-dtype read widened to double
    std::vector<double> values(const std::string& name) const;
};

void write_container(const std::string& path, const Container& c);
Container read_container(const std::string& path);

} // namespace dvrm
