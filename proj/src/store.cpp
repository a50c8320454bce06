#include "lginr/store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "the model container assumes a little-endian host");

namespace lginr {

namespace {

constexpr unsigned char kMagic[8] = {'L', 'G', 'I', 'N', 'R', 0, 1, 0};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    const auto n = out.size();
    out.resize(n + 4);
    std::memcpy(out.data() + n, &v, 4);
}

void put_f32(std::vector<unsigned char>& out, float v) {
    const auto n = out.size();
    out.resize(n + 4);
    std::memcpy(out.data() + n, &v, 4);
}

void put_f64(std::vector<unsigned char>& out, double v) {
    const auto n = out.size();
    out.resize(n + 8);
    std::memcpy(out.data() + n, &v, 8);
}

struct Reader {
    const std::vector<unsigned char>& buf;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > buf.size())
            throw std::runtime_error(std::string("model file: truncated while reading ") + what);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    }
    float f32(const char* what) {
        need(4, what);
        float v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    }
    double f64(const char* what) {
        need(8, what);
        double v;
        std::memcpy(&v, buf.data() + pos, 8);
        pos += 8;
        return v;
    }
};

std::vector<unsigned char> encode_header(const ModelSpec& spec, const CropMask& present) {
    std::vector<unsigned char> out;
    out.insert(out.end(), kMagic, kMagic + 8);
    put_u32(out, static_cast<std::uint32_t>(spec.kind));
    put_u32(out, static_cast<std::uint32_t>(spec.in_dim));
    put_u32(out, static_cast<std::uint32_t>(spec.out_dim));
    put_u32(out, static_cast<std::uint32_t>(spec.depth));
    put_u32(out, static_cast<std::uint32_t>(spec.local_hidden));
    put_u32(out, static_cast<std::uint32_t>(spec.global_hidden));
    put_f32(out, spec.omega);
    put_u32(out, static_cast<std::uint32_t>(spec.merge));
    for (index d = 0; d < spec.grid.dims(); ++d) {
        put_f64(out, spec.grid.bounds.lo[static_cast<std::size_t>(d)]);
        put_f64(out, spec.grid.bounds.hi[static_cast<std::size_t>(d)]);
    }
    for (auto f : spec.grid.factors) put_u32(out, f);
    const index K = spec.partition_count();
    std::vector<unsigned char> bitmap(static_cast<std::size_t>((K + 7) / 8), 0);
    for (index k = 0; k < K; ++k)
        if (present.keep[static_cast<std::size_t>(k)])
            bitmap[static_cast<std::size_t>(k >> 3)] |=
                static_cast<unsigned char>(1u << (k & 7));
    out.insert(out.end(), bitmap.begin(), bitmap.end());
    return out;
}

void write_atomic(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("model file: cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("model file: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("model file: cannot open " + path.string());
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<unsigned char> buf(size);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(in.gcount()) != size)
        throw std::runtime_error("model file: short read from " + path.string());
    return buf;
}

struct ParsedHeader {
    ModelSpec spec;
    CropMask present;
    std::size_t header_bytes = 0;
    index global_merge_params = 0;
    index local_pp = 0;
};

ParsedHeader parse_header(const std::vector<unsigned char>& buf) {
    if (buf.size() < 8 || std::memcmp(buf.data(), kMagic, 6) != 0 || buf[7] != 0)
        throw std::runtime_error("model file: bad magic at offset 0");
    if (buf[6] != 1)
        throw std::runtime_error("model file: unsupported format version " +
                                 std::to_string(buf[6]) + " at offset 6");
    Reader r{buf, 8};
    ParsedHeader h;
    const auto kind = r.u32("kind");
    if (kind > 2) throw std::runtime_error("model file: unknown model kind");
    h.spec.kind = static_cast<ModelKind>(kind);
    h.spec.in_dim = r.u32("in_dim");
    h.spec.out_dim = r.u32("out_dim");
    h.spec.depth = r.u32("depth");
    h.spec.local_hidden = r.u32("local_hidden");
    h.spec.global_hidden = r.u32("global_hidden");
    h.spec.omega = r.f32("omega");
    const auto merge = r.u32("merge_kind");
    if (merge > 1) throw std::runtime_error("model file: unknown merge kind");
    h.spec.merge = static_cast<MergeKind>(merge);
    h.spec.grid.bounds.lo.resize(static_cast<std::size_t>(h.spec.in_dim));
    h.spec.grid.bounds.hi.resize(static_cast<std::size_t>(h.spec.in_dim));
    for (index d = 0; d < h.spec.in_dim; ++d) {
        h.spec.grid.bounds.lo[static_cast<std::size_t>(d)] = r.f64("bounds");
        h.spec.grid.bounds.hi[static_cast<std::size_t>(d)] = r.f64("bounds");
    }
    h.spec.grid.factors.resize(static_cast<std::size_t>(h.spec.in_dim));
    for (index d = 0; d < h.spec.in_dim; ++d)
        h.spec.grid.factors[static_cast<std::size_t>(d)] = r.u32("factors");
    h.spec.validate();

    const index K = h.spec.partition_count();
    const auto bitmap_bytes = static_cast<std::size_t>((K + 7) / 8);
    r.need(bitmap_bytes, "present bitmap");
    h.present.keep.assign(static_cast<std::size_t>(K), 0);
    for (index k = 0; k < K; ++k)
        h.present.keep[static_cast<std::size_t>(k)] =
            (buf[r.pos + static_cast<std::size_t>(k >> 3)] >> (k & 7)) & 1;
    r.pos += bitmap_bytes;
    h.header_bytes = r.pos;

    if (h.present.kept_count() < 1)
        throw std::runtime_error("model file: present bitmap keeps no partition");
    const auto b = param_breakdown(h.spec, 0);
    h.global_merge_params = b.global_net + b.merge;
    h.local_pp = b.local_per_partition;
    const std::size_t expect =
        h.header_bytes +
        4 * static_cast<std::size_t>(h.global_merge_params + h.present.kept_count() * h.local_pp);
    if (buf.size() != expect)
        throw std::runtime_error("model file: length " + std::to_string(buf.size()) +
                                 " does not match header-derived size " + std::to_string(expect));
    return h;
}

void append_f32(std::vector<unsigned char>& out, const float* p, index count) {
    const auto n = out.size();
    out.resize(n + static_cast<std::size_t>(count) * 4);
    std::memcpy(out.data() + n, p, static_cast<std::size_t>(count) * 4);
}

}  // namespace

void save(const Model<float>& model, const std::filesystem::path& path) {
    model.spec.validate();
    for (const auto& l : model.weights.global)
        if (!all_finite(l.w) || !all_finite(l.b))
            throw std::invalid_argument("save: non-finite global weights");
    if (!all_finite(model.weights.merge.w) || !all_finite(model.weights.merge.b))
        throw std::invalid_argument("save: non-finite merge weights");
    for (const auto& l : model.weights.local)
        if (!all_finite(l.w) || !all_finite(l.b))
            throw std::invalid_argument("save: non-finite local weights");

    auto out = encode_header(model.spec, model.present);
    for (const auto& l : model.weights.global) {
        append_f32(out, l.w.data.data(), l.w.size());
        append_f32(out, l.b.data.data(), l.b.size());
    }
    if (model.spec.kind == ModelKind::lgs) {
        append_f32(out, model.weights.merge.w.data.data(), model.weights.merge.w.size());
        append_f32(out, model.weights.merge.b.data.data(), model.weights.merge.b.size());
    }
    const index kept = model.present.kept_count();
    for (index slot = 0; slot < kept; ++slot)
        for (const auto& stack : model.weights.local) {
            append_f32(out, stack.w.slice(slot), stack.w.slice_size());
            append_f32(out, stack.b.slice(slot), stack.b.slice_size());
        }
    write_atomic(path, out);
}

Model<float> load(const std::filesystem::path& path) {
    const auto buf = read_all(path);
    auto h = parse_header(buf);

    Model<float> m;
    m.spec = h.spec;
    m.present = h.present;
    Reader r{buf, h.header_bytes};

    auto read_mat = [&](index rows, index cols) {
        Mat<float> w(rows, cols);
        r.need(static_cast<std::size_t>(w.size()) * 4, "weights");
        std::memcpy(w.data.data(), buf.data() + r.pos, static_cast<std::size_t>(w.size()) * 4);
        r.pos += static_cast<std::size_t>(w.size()) * 4;
        return w;
    };

    const index D = h.spec.depth;
    const index hl = h.spec.local_hidden;
    const index hg = h.spec.global_hidden;
    if (h.spec.kind == ModelKind::lgs) {
        m.weights.global.resize(static_cast<std::size_t>(D - 1));
        for (index s = 0; s < D - 1; ++s) {
            auto& layer = m.weights.global[static_cast<std::size_t>(s)];
            layer.w = read_mat(hg, s == 0 ? h.spec.in_dim : hg);
            layer.b = read_mat(1, hg);
        }
        const index merge_in = h.spec.merge == MergeKind::concat_fc ? hl + hg : hg;
        m.weights.merge.w = read_mat(hl, merge_in);
        m.weights.merge.b = read_mat(1, hl);
    }

    const index kept = h.present.kept_count();
    m.weights.local.resize(static_cast<std::size_t>(D));
    for (index s = 0; s < D; ++s) {
        const index in = s == 0 ? h.spec.in_dim : hl;
        const index out = s == D - 1 ? h.spec.out_dim : hl;
        m.weights.local[static_cast<std::size_t>(s)].w = BatchedMat<float>(kept, out, in);
        m.weights.local[static_cast<std::size_t>(s)].b = BatchedMat<float>(kept, 1, out);
    }
    for (index slot = 0; slot < kept; ++slot)
        for (index s = 0; s < D; ++s) {
            auto& stack = m.weights.local[static_cast<std::size_t>(s)];
            r.need(static_cast<std::size_t>(stack.w.slice_size() + stack.b.slice_size()) * 4,
                   "local block");
            std::memcpy(stack.w.slice(slot), buf.data() + r.pos,
                        static_cast<std::size_t>(stack.w.slice_size()) * 4);
            r.pos += static_cast<std::size_t>(stack.w.slice_size()) * 4;
            std::memcpy(stack.b.slice(slot), buf.data() + r.pos,
                        static_cast<std::size_t>(stack.b.slice_size()) * 4);
            r.pos += static_cast<std::size_t>(stack.b.slice_size()) * 4;
        }
    return m;
}

void crop_file(const std::filesystem::path& input, const std::vector<index>& drop,
               const std::filesystem::path& output) {
    const auto buf = read_all(input);
    auto h = parse_header(buf);
    const index K = h.spec.partition_count();

    std::set<index> dropped;
    for (index k : drop) {
        if (k < 0 || k >= K)
            throw std::out_of_range("crop: partition " + std::to_string(k) + " out of range");
        if (!h.present.keep[static_cast<std::size_t>(k)])
            throw std::invalid_argument("crop: partition " + std::to_string(k) +
                                        " was already cropped");
        if (!dropped.insert(k).second)
            throw std::invalid_argument("crop: partition " + std::to_string(k) + " listed twice");
    }
    if (!drop.empty() && h.present.kept_count() - static_cast<index>(dropped.size()) < 1)
        throw std::invalid_argument("crop: at least one partition must remain");

    CropMask next = h.present;
    for (index k : dropped) next.keep[static_cast<std::size_t>(k)] = 0;

    auto out = encode_header(h.spec, next);
    const std::size_t gm_bytes = static_cast<std::size_t>(h.global_merge_params) * 4;
    out.insert(out.end(), buf.begin() + static_cast<std::ptrdiff_t>(h.header_bytes),
               buf.begin() + static_cast<std::ptrdiff_t>(h.header_bytes + gm_bytes));
    const std::size_t block_bytes = static_cast<std::size_t>(h.local_pp) * 4;
    std::size_t offset = h.header_bytes + gm_bytes;
    for (index k = 0; k < K; ++k) {
        if (!h.present.keep[static_cast<std::size_t>(k)]) continue;
        if (next.keep[static_cast<std::size_t>(k)])
            out.insert(out.end(), buf.begin() + static_cast<std::ptrdiff_t>(offset),
                       buf.begin() + static_cast<std::ptrdiff_t>(offset + block_bytes));
        offset += block_bytes;
    }
    write_atomic(output, out);
}

}  // namespace lginr
