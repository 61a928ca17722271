#include "spdagg/fts.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "spdagg/errors.hpp"

namespace spdagg {

namespace {

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) {
            throw ParseError(std::string("truncated ") + what + ": need " + std::to_string(n) +
                                 " bytes, " + std::to_string(remaining()) + " available",
                             pos_);
        }
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void expect_magic(Reader& r, std::string_view magic) {
    const std::size_t at = r.offset();
    const std::string got = r.str(4, "magic");
    if (got != magic) throw ParseError("bad magic, expected \"" + std::string(magic) + "\"", at);
}

}  // namespace

std::vector<std::uint8_t> encode_fts(const FtsDataset& ds) {
    ds.validate();
    Writer w;
    w.raw("FTS1");
    w.u32(kFtsVersion);
    w.u32(static_cast<std::uint32_t>(ds.size()));
    w.u32(ds.channels);
    w.u32(ds.height);
    w.u32(ds.width);
    w.u32(ds.num_classes);
    for (std::uint32_t label : ds.labels) w.u32(label);
    for (const auto& s : ds.samples)
        for (double v : s.data()) w.f32(static_cast<float>(v));
    return w.take();
}

FtsDataset decode_fts(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    expect_magic(r, "FTS1");
    std::size_t at = r.offset();
    if (const std::uint32_t version = r.u32("version"); version != kFtsVersion) {
        throw ParseError("unsupported FTS version " + std::to_string(version), at);
    }
    FtsDataset ds;
    at = r.offset();
    const std::uint32_t count = r.u32("num_samples");
    if (count == 0) throw ParseError("num_samples is zero", at);
    at = r.offset();
    ds.channels = r.u32("channels");
    if (ds.channels == 0) throw ParseError("channel count is zero", at);
    at = r.offset();
    ds.height = r.u32("height");
    ds.width = r.u32("width");
    if (static_cast<std::uint64_t>(ds.height) * ds.width < 2) {
        throw ParseError("spatial size H*W must be at least 2", at);
    }
    at = r.offset();
    ds.num_classes = r.u32("num_classes");
    if (ds.num_classes == 0) throw ParseError("num_classes is zero", at);
    if (ds.num_classes > count) {
        throw ParseError("num_classes " + std::to_string(ds.num_classes) + " exceeds num_samples " +
                             std::to_string(count),
                         at);
    }

    // Length check before allocating anything sized by the header.
    const std::uint64_t available = r.remaining();
    const std::uint64_t limit = available / 4 / count;
    const std::uint64_t plane = static_cast<std::uint64_t>(ds.channels) * ds.height;
    const bool fits = plane <= limit && ds.width <= limit / plane;
    const std::uint64_t per_sample = fits ? plane * ds.width : 0;
    const std::uint64_t expected = fits ? (per_sample + 1) * 4 * count : 0;
    if (!fits || expected != available) {
        const std::string want =
            fits ? std::to_string(expected) + " bytes"
                 : "more than " + std::to_string(available) + " bytes (" + std::to_string(count) +
                       " samples of " + std::to_string(ds.channels) + "x" + std::to_string(ds.height) +
                       "x" + std::to_string(ds.width) + " values)";
        throw ParseError("payload length mismatch: expected " + want + " after header, got " +
                             std::to_string(available),
                         r.offset());
    }

    ds.labels.resize(count);
    std::vector<std::size_t> per_class(ds.num_classes, 0);
    for (std::uint32_t i = 0; i < count; ++i) {
        at = r.offset();
        ds.labels[i] = r.u32("label");
        if (ds.labels[i] >= ds.num_classes) {
            throw ParseError("label " + std::to_string(ds.labels[i]) + " of sample " + std::to_string(i) +
                                 " >= num_classes " + std::to_string(ds.num_classes),
                             at);
        }
        ++per_class[ds.labels[i]];
    }
    for (std::uint32_t c = 0; c < ds.num_classes; ++c) {
        if (per_class[c] == 0) {
            throw ParseError("declared class " + std::to_string(c) + " has no samples", kFtsHeaderSize - 4);
        }
    }

    const std::size_t n = static_cast<std::size_t>(per_sample);
    ds.samples.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::vector<double> data(n);
        for (std::size_t k = 0; k < n; ++k) {
            at = r.offset();
            const float v = r.f32("payload");
            if (!std::isfinite(v)) {
                throw ParseError("non-finite value in sample " + std::to_string(i), at);
            }
            data[k] = v;
        }
        ds.samples.emplace_back(ds.channels, ds.height, ds.width, std::move(data));
    }
    return ds;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

void fts_write(const FtsDataset& ds, const std::string& path) { write_file_bytes(path, encode_fts(ds)); }

FtsDataset fts_read(const std::string& path) { return decode_fts(read_file_bytes(path)); }

std::vector<std::uint8_t> encode_checkpoint(const std::vector<CheckpointBlock>& blocks) {
    Writer w;
    w.raw("FTSP");
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(blocks.size()));
    for (const auto& b : blocks) {
        w.u32(static_cast<std::uint32_t>(b.name.size()));
        w.raw(b.name);
        w.u32(static_cast<std::uint32_t>(b.values.rows()));
        w.u32(static_cast<std::uint32_t>(b.values.cols()));
        for (double v : b.values.data()) w.f64(v);
    }
    return w.take();
}

std::vector<CheckpointBlock> decode_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    expect_magic(r, "FTSP");
    std::size_t at = r.offset();
    if (const std::uint32_t version = r.u32("version"); version != kCheckpointVersion) {
        throw ParseError("unsupported checkpoint version " + std::to_string(version), at);
    }
    const std::uint32_t count = r.u32("block count");
    std::vector<CheckpointBlock> blocks;
    for (std::uint32_t b = 0; b < count; ++b) {
        const std::uint32_t name_len = r.u32("block name length");
        CheckpointBlock block;
        block.name = r.str(name_len, "block name");
        at = r.offset();
        const std::uint32_t rows = r.u32("block rows");
        const std::uint32_t cols = r.u32("block cols");
        const std::uint64_t n = static_cast<std::uint64_t>(rows) * cols;
        if (n > r.remaining() / 8) {
            throw ParseError("block '" + block.name + "' declares " + std::to_string(n) +
                                 " values but only " + std::to_string(r.remaining()) + " bytes remain",
                             at);
        }
        std::vector<double> data(static_cast<std::size_t>(n));
        for (double& v : data) v = r.f64("block payload");
        block.values = Matrix(rows, cols, std::move(data));
        blocks.push_back(std::move(block));
    }
    if (r.remaining() != 0) {
        throw ParseError(std::to_string(r.remaining()) + " trailing bytes after last block", r.offset());
    }
    return blocks;
}

std::vector<CheckpointBlock> checkpoint_blocks(const PipelineConfig& cfg, const NetworkParams& params) {
    std::vector<CheckpointBlock> blocks;
    blocks.push_back({"pipeline", Matrix(1, 8,
                                         {static_cast<double>(cfg.in_channels),
                                          static_cast<double>(cfg.mixed_channels),
                                          static_cast<double>(cfg.transform_dim),
                                          static_cast<double>(cfg.num_classes),
                                          cfg.use_spd_relu ? 1.0 : 0.0,
                                          cfg.aggregator == Aggregator::kernel ? 0.0 : 1.0,
                                          cfg.normalizations.power ? 1.0 : 0.0,
                                          cfg.normalizations.l2 ? 1.0 : 0.0})});
    auto column = [](const std::vector<double>& v) {
        return Matrix(v.size(), 1, v);
    };
    if (cfg.mixed_channels > 0) {
        blocks.push_back({"mix.weights", params.mix.weights});
        blocks.push_back({"mix.bias", column(params.mix.bias)});
    }
    blocks.push_back({"transform.w", params.transform.matrix()});
    blocks.push_back({"dense.weights", params.dense.weights});
    blocks.push_back({"dense.bias", column(params.dense.bias)});
    return blocks;
}

Checkpoint checkpoint_from_blocks(const std::vector<CheckpointBlock>& blocks) {
    std::map<std::string, const Matrix*> by_name;
    for (const auto& b : blocks) by_name[b.name] = &b.values;
    auto get = [&](const std::string& name) -> const Matrix& {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw ContractError("checkpoint: missing block '" + name + "'");
        return *it->second;
    };
    auto as_vector = [](const Matrix& m) { return std::vector<double>(m.data().begin(), m.data().end()); };

    const Matrix& rec = get("pipeline");
    if (rec.size() != 8) throw ContractError("checkpoint: pipeline record must have 8 entries");
    const auto d = rec.data();
    auto count = [](double v) {
        if (!(v >= 0.0) || v != std::floor(v) || v > 1e9) throw ContractError("checkpoint: bad count");
        return static_cast<std::size_t>(v);
    };
    Checkpoint ck;
    ck.pipeline.in_channels = count(d[0]);
    ck.pipeline.mixed_channels = count(d[1]);
    ck.pipeline.transform_dim = count(d[2]);
    ck.pipeline.num_classes = count(d[3]);
    ck.pipeline.use_spd_relu = d[4] != 0.0;
    ck.pipeline.aggregator = d[5] == 0.0 ? Aggregator::kernel : Aggregator::covariance;
    ck.pipeline.normalizations.power = d[6] != 0.0;
    ck.pipeline.normalizations.l2 = d[7] != 0.0;
    ck.pipeline.validate();

    const PipelineConfig& cfg = ck.pipeline;
    auto expect_shape = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
        if (m.rows() != r || m.cols() != c) {
            throw ContractError(std::string("checkpoint: block '") + name + "' has shape " +
                                m.shape_string());
        }
    };
    if (cfg.mixed_channels > 0) {
        ck.params.mix.weights = get("mix.weights");
        expect_shape(ck.params.mix.weights, cfg.mixed_channels, cfg.in_channels, "mix.weights");
        const Matrix& bias = get("mix.bias");
        expect_shape(bias, cfg.mixed_channels, 1, "mix.bias");
        ck.params.mix.bias = as_vector(bias);
    }
    const Matrix& w = get("transform.w");
    expect_shape(w, cfg.aggregated_channels(), cfg.transform_dim, "transform.w");
    ck.params.transform = StiefelPoint(w);
    ck.params.dense.weights = get("dense.weights");
    expect_shape(ck.params.dense.weights, cfg.num_classes, cfg.head_size(), "dense.weights");
    const Matrix& db = get("dense.bias");
    expect_shape(db, cfg.num_classes, 1, "dense.bias");
    ck.params.dense.bias = as_vector(db);
    return ck;
}

void checkpoint_write(const PipelineConfig& cfg, const NetworkParams& params, const std::string& path) {
    write_file_bytes(path, encode_checkpoint(checkpoint_blocks(cfg, params)));
}

Checkpoint checkpoint_read(const std::string& path) {
    return checkpoint_from_blocks(decode_checkpoint(read_file_bytes(path)));
}

}  // namespace spdagg
