#include "dvrm/container.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace dvrm {

namespace {

constexpr char kMagic[8] = {'D', 'V', 'R', 'M', 'B', 'O', 'X', '1'};

void check_new_array(const Container& c, const std::string& name, const Shape& shape,
                     std::size_t numel) {
    if (name.empty()) throw ParamError("container array name must be non-empty");
    for (const auto& a : c.arrays)
        if (a.name == name) throw ParamError("container already holds an array named '" + name + "'");
    if (shape_numel(shape) != numel)
        throw ShapeError("array '" + name + "': shape " + shape_str(shape) + " wants " +
                         std::to_string(shape_numel(shape)) + " elements, got " +
                         std::to_string(numel));
}

} // namespace

void Container::add_f32(const std::string& name, Shape shape, std::vector<float> data) {
    check_new_array(*this, name, shape, data.size());
    ContainerArray a;
    a.name = name;
    a.dtype = "f32";
    a.shape = std::move(shape);
    a.f32 = std::move(data);
    arrays.push_back(std::move(a));
}

void Container::add_f64(const std::string& name, Shape shape, std::vector<double> data) {
    check_new_array(*this, name, shape, data.size());
    ContainerArray a;
    a.name = name;
    a.dtype = "f64";
    a.shape = std::move(shape);
    a.f64 = std::move(data);
    arrays.push_back(std::move(a));
}

bool Container::has(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.name == name) return true;
    return false;
}

const ContainerArray& Container::get(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.name == name) return a;
    throw DataError("container has no array named '" + name + "'");
}

std::vector<double> Container::values(const std::string& name) const {
    const auto& a = get(name);
    if (a.dtype == "f64") return a.f64;
    return std::vector<double>(a.f32.begin(), a.f32.end());
}

void write_container(const std::string& path, const Container& c) {
    nlohmann::json hdr;
    hdr["meta"] = c.meta;
    hdr["arrays"] = nlohmann::json::array();
    for (const auto& a : c.arrays) {
        nlohmann::json e;
        e["name"] = a.name;
        e["dtype"] = a.dtype;
        e["shape"] = a.shape;
        hdr["arrays"].push_back(e);
    }
    std::string htext = hdr.dump(); // nlohmann sorts object keys: stable bytes

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    f.write(kMagic, 8);
    std::uint64_t hlen = htext.size();
    unsigned char lenbuf[8];
    for (int i = 0; i < 8; ++i) lenbuf[i] = (unsigned char)(hlen >> (8 * i));
    f.write(reinterpret_cast<const char*>(lenbuf), 8);
    f.write(htext.data(), (std::streamsize)htext.size());
    for (const auto& a : c.arrays) {
        if (a.dtype == "f32")
            f.write(reinterpret_cast<const char*>(a.f32.data()),
                    (std::streamsize)(a.f32.size() * sizeof(float)));
        else
            f.write(reinterpret_cast<const char*>(a.f64.data()),
                    (std::streamsize)(a.f64.size() * sizeof(double)));
    }
    f.flush();
    if (!f) throw DataError("write to '" + path + "' failed");
}

Container read_container(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (bytes.size() < 16)
        throw DataError("'" + path + "': truncated container, only " +
                        std::to_string(bytes.size()) + " bytes");
    if (std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw DataError("'" + path + "': bad magic, expected DVRMBOX1");
    std::uint64_t hlen = 0;
    for (int i = 0; i < 8; ++i)
        hlen |= (std::uint64_t)(unsigned char)bytes[8 + i] << (8 * i);
    if (16 + hlen > bytes.size())
        throw DataError("'" + path + "': header declares " + std::to_string(hlen) +
                        " bytes but file ends early");

    nlohmann::json hdr;
    try {
        hdr = nlohmann::json::parse(bytes.substr(16, hlen));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("'" + path + "': malformed header: " + std::string(e.what()));
    }

    Container c;
    try {
        if (hdr.contains("meta"))
            c.meta = hdr.at("meta").get<std::map<std::string, std::string>>();
        std::size_t off = 16 + hlen;
        for (const auto& e : hdr.at("arrays")) {
            ContainerArray a;
            a.name = e.at("name").get<std::string>();
            a.dtype = e.at("dtype").get<std::string>();
            a.shape = e.at("shape").get<Shape>();
            if (a.dtype != "f32" && a.dtype != "f64")
                throw DataError("'" + path + "': array '" + a.name + "' has unknown dtype '" +
                                a.dtype + "'");
            std::size_t nbytes = a.byte_size();
            if (off + nbytes > bytes.size())
                throw DataError("'" + path + "': array '" + a.name + "' needs " +
                                std::to_string(nbytes) + " payload bytes but only " +
                                std::to_string(bytes.size() - off) + " remain");
            if (a.dtype == "f32") {
                a.f32.resize(a.numel());
                std::memcpy(a.f32.data(), bytes.data() + off, nbytes);
            } else {
                a.f64.resize(a.numel());
                std::memcpy(a.f64.data(), bytes.data() + off, nbytes);
            }
            off += nbytes;
            c.arrays.push_back(std::move(a));
        }
        if (off != bytes.size())
            throw DataError("'" + path + "': " + std::to_string(bytes.size() - off) +
                            " trailing bytes after declared payload");
    } catch (const nlohmann::json::exception& e) {
        throw DataError("'" + path + "': malformed header: " + std::string(e.what()));
    }
    return c;
}

} // namespace dvrm
