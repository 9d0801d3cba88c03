#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace weedmap::serialize {

using json = nlohmann::ordered_json;

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Versioned binary container: magic, format version, a JSON metadata header,
// then raw float blobs in a fixed traversal order.
class Writer {
public:
    Writer(const std::string& path, std::uint32_t magic, std::uint32_t version,
           const json& metadata)
        : out_(path, std::ios::binary) {
        if (!out_) throw FormatError("cannot open " + path + " for writing");
        write_u32(magic);
        write_u32(version);
        const std::string meta = metadata.dump();
        write_u64(meta.size());
        out_.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    }

    void write_u32(std::uint32_t v) { out_.write(reinterpret_cast<const char*>(&v), 4); }
    void write_u64(std::uint64_t v) { out_.write(reinterpret_cast<const char*>(&v), 8); }

    void write_blob(const float* data, std::size_t n) {
        write_u64(n);
        out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
    }
    void write_blob(const std::vector<float>& v) { write_blob(v.data(), v.size()); }

    void write_blob_f64(const double* data, std::size_t n) {
        write_u64(n);
        out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 8));
    }

    void finish() {
        out_.flush();
        if (!out_) throw FormatError("write failed");
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    Reader(const std::string& path, std::uint32_t magic, std::uint32_t max_version)
        : in_(path, std::ios::binary) {
        if (!in_) throw FormatError("cannot open " + path);
        if (read_u32() != magic) throw FormatError(path + ": wrong container magic");
        version_ = read_u32();
        if (version_ == 0 || version_ > max_version)
            throw FormatError(path + ": unsupported container version");
        const std::uint64_t meta_len = read_u64();
        std::string meta(meta_len, '\0');
        in_.read(meta.data(), static_cast<std::streamsize>(meta_len));
        if (!in_) throw FormatError(path + ": truncated metadata");
        metadata_ = json::parse(meta);
    }

    std::uint32_t version() const { return version_; }
    const json& metadata() const { return metadata_; }

    std::uint32_t read_u32() {
        std::uint32_t v = 0;
        in_.read(reinterpret_cast<char*>(&v), 4);
        if (!in_) throw FormatError("truncated container");
        return v;
    }
    std::uint64_t read_u64() {
        std::uint64_t v = 0;
        in_.read(reinterpret_cast<char*>(&v), 8);
        if (!in_) throw FormatError("truncated container");
        return v;
    }

    void read_blob(float* data, std::size_t expected) {
        const std::uint64_t n = read_u64();
        if (n != expected) throw FormatError("blob size mismatch");
        in_.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4));
        if (!in_) throw FormatError("truncated blob");
    }
    std::vector<float> read_blob() {
        const std::uint64_t n = read_u64();
        std::vector<float> v(n);
        in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 4));
        if (!in_) throw FormatError("truncated blob");
        return v;
    }
    void read_blob_f64(double* data, std::size_t expected) {
        const std::uint64_t n = read_u64();
        if (n != expected) throw FormatError("blob size mismatch");
        in_.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 8));
        if (!in_) throw FormatError("truncated blob");
    }

private:
    std::ifstream in_;
    std::uint32_t version_ = 0;
    json metadata_;
};

}  // namespace weedmap::serialize
