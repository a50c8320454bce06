#include "lginr/signalio.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace lginr {

index Signal::point_count() const {
    index n = 1;
    for (index r : resolution) n *= r;
    return n;
}

void Signal::validate() const {
    if (resolution.empty()) throw std::invalid_argument("signal: needs at least one dimension");
    for (index r : resolution)
        if (r < 1) throw std::invalid_argument("signal: resolution entries must be >= 1");
    if (channels < 1) throw std::invalid_argument("signal: channels must be >= 1");
    if (static_cast<index>(values.size()) != point_count() * channels)
        throw std::invalid_argument("signal: value count does not match resolution x channels");
    for (float v : values)
        if (!(v >= -1.f && v <= 1.f))
            throw std::invalid_argument("signal: values must lie in [-1, 1]");
}

Mat<float> grid_coords(std::span<const index> resolution) {
    const index n = static_cast<index>(resolution.size());
    index points = 1;
    for (index r : resolution) {
        if (r < 1) throw std::invalid_argument("grid_coords: resolution entries must be >= 1");
        points *= r;
    }
    // per-dimension axes, then row-major enumeration (last dimension fastest)
    std::vector<std::vector<float>> axes(static_cast<std::size_t>(n));
    for (index d = 0; d < n; ++d) {
        const index r = resolution[static_cast<std::size_t>(d)];
        auto& ax = axes[static_cast<std::size_t>(d)];
        ax.resize(static_cast<std::size_t>(r));
        for (index i = 0; i < r; ++i)
            ax[static_cast<std::size_t>(i)] =
                r == 1 ? 0.f
                       : static_cast<float>(-1.0 + 2.0 * static_cast<double>(i) /
                                                       static_cast<double>(r - 1));
    }
    Mat<float> coords(points, n);
    std::vector<index> cell(static_cast<std::size_t>(n), 0);
    for (index p = 0; p < points; ++p) {
        float* row = coords.row(p);
        for (index d = 0; d < n; ++d)
            row[d] = axes[static_cast<std::size_t>(d)][static_cast<std::size_t>(cell[static_cast<std::size_t>(d)])];
        for (index d = n - 1; d >= 0; --d) {
            auto& c = cell[static_cast<std::size_t>(d)];
            if (++c < resolution[static_cast<std::size_t>(d)]) break;
            c = 0;
        }
    }
    return coords;
}

// ---------------------------------------------------------------------------
// PGM / PPM
// ---------------------------------------------------------------------------
namespace {

int next_header_int(std::istream& in, const char* what) {
    // skips whitespace and '#' comments per the PNM spec
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        break;
    }
    int value = 0;
    if (!(in >> value))
        throw std::runtime_error(std::string("image: malformed header, missing ") + what);
    return value;
}

float byte_to_value(unsigned char b) {
    return static_cast<float>(2.0 * (static_cast<double>(b) / 255.0) - 1.0);
}

unsigned char value_to_byte(float v) {
    double u = (static_cast<double>(v) + 1.0) / 2.0;
    if (u < 0.0) u = 0.0;
    if (u > 1.0) u = 1.0;
    return static_cast<unsigned char>(std::lround(u * 255.0));
}

}  // namespace

Signal load_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("image: cannot open " + path.string());
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '6'))
        throw std::runtime_error("image: not a binary PGM/PPM file (bad magic)");
    const index channels = m1 == '5' ? 1 : 3;
    const int w = next_header_int(in, "width");
    const int h = next_header_int(in, "height");
    const int maxval = next_header_int(in, "maxval");
    if (w < 1 || h < 1) throw std::runtime_error("image: non-positive dimensions");
    if (maxval != 255)
        throw std::runtime_error("image: only maxval 255 supported, got " + std::to_string(maxval));
    in.get();  // single whitespace after maxval

    Signal s;
    s.resolution = {static_cast<index>(h), static_cast<index>(w)};
    s.channels = channels;
    const std::size_t payload = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) *
                                static_cast<std::size_t>(channels);
    std::vector<unsigned char> raw(payload);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(payload));
    if (static_cast<std::size_t>(in.gcount()) != payload)
        throw std::runtime_error("image: truncated payload in " + path.string());
    s.values.resize(payload);
    for (std::size_t i = 0; i < payload; ++i) s.values[i] = byte_to_value(raw[i]);
    return s;
}

void save_image(const Signal& signal, const std::filesystem::path& path) {
    signal.validate();
    if (signal.dims() != 2)
        throw std::invalid_argument("image: only 2-dimensional signals can be saved");
    if (signal.channels != 1 && signal.channels != 3)
        throw std::invalid_argument("image: channel count must be 1 (PGM) or 3 (PPM)");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("image: cannot write " + path.string());
    const index h = signal.resolution[0], w = signal.resolution[1];
    out << (signal.channels == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> raw(signal.values.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = value_to_byte(signal.values[i]);
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw std::runtime_error("image: write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// WAV
// ---------------------------------------------------------------------------
namespace {

std::uint32_t rd_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t rd_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(static_cast<std::uint16_t>(p[0]) |
                                      (static_cast<std::uint16_t>(p[1]) << 8));
}

void wr_u32(std::vector<unsigned char>& v, std::uint32_t x) {
    v.push_back(static_cast<unsigned char>(x & 0xff));
    v.push_back(static_cast<unsigned char>((x >> 8) & 0xff));
    v.push_back(static_cast<unsigned char>((x >> 16) & 0xff));
    v.push_back(static_cast<unsigned char>((x >> 24) & 0xff));
}

void wr_u16(std::vector<unsigned char>& v, std::uint16_t x) {
    v.push_back(static_cast<unsigned char>(x & 0xff));
    v.push_back(static_cast<unsigned char>((x >> 8) & 0xff));
}

}  // namespace

Signal load_wav(const std::filesystem::path& path, int* sample_rate) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("wav: cannot open " + path.string());
    unsigned char hdr[44];
    in.read(reinterpret_cast<char*>(hdr), 44);
    if (in.gcount() != 44) throw std::runtime_error("wav: file shorter than the canonical header");
    if (std::memcmp(hdr, "RIFF", 4) != 0 || std::memcmp(hdr + 8, "WAVE", 4) != 0)
        throw std::runtime_error("wav: not a RIFF/WAVE file");
    if (std::memcmp(hdr + 12, "fmt ", 4) != 0 || rd_u32(hdr + 16) != 16)
        throw std::runtime_error("wav: expected a canonical 16-byte fmt chunk");
    if (rd_u16(hdr + 20) != 1) throw std::runtime_error("wav: compressed formats not supported");
    if (rd_u16(hdr + 22) != 1) throw std::runtime_error("wav: only mono files supported");
    if (rd_u16(hdr + 34) != 16) throw std::runtime_error("wav: only 16-bit PCM supported");
    if (std::memcmp(hdr + 36, "data", 4) != 0)
        throw std::runtime_error("wav: expected the data chunk right after fmt");
    const std::uint32_t data_bytes = rd_u32(hdr + 40);
    if (data_bytes % 2 != 0) throw std::runtime_error("wav: odd data chunk size");
    if (sample_rate) *sample_rate = static_cast<int>(rd_u32(hdr + 24));

    const std::size_t samples = data_bytes / 2;
    std::vector<unsigned char> raw(data_bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(data_bytes));
    if (static_cast<std::size_t>(in.gcount()) != data_bytes)
        throw std::runtime_error("wav: truncated payload in " + path.string());

    Signal s;
    s.resolution = {static_cast<index>(samples)};
    s.channels = 1;
    s.values.resize(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        const auto u = rd_u16(raw.data() + 2 * i);
        const auto sv = static_cast<std::int16_t>(u);
        s.values[i] = static_cast<float>(sv) / 32768.0f;
    }
    return s;
}

void save_wav(const Signal& signal, const std::filesystem::path& path, int sample_rate) {
    signal.validate();
    if (signal.dims() != 1 || signal.channels != 1)
        throw std::invalid_argument("wav: only 1-dimensional mono signals can be saved");
    if (sample_rate < 1) throw std::invalid_argument("wav: sample rate must be >= 1");

    const std::size_t samples = signal.values.size();
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples * 2);
    std::vector<unsigned char> out;
    out.reserve(44 + data_bytes);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    wr_u32(out, 36 + data_bytes);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    wr_u32(out, 16);
    wr_u16(out, 1);  // PCM
    wr_u16(out, 1);  // mono
    wr_u32(out, static_cast<std::uint32_t>(sample_rate));
    wr_u32(out, static_cast<std::uint32_t>(sample_rate) * 2);
    wr_u16(out, 2);   // block align
    wr_u16(out, 16);  // bits per sample
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    wr_u32(out, data_bytes);
    for (float v : signal.values) {
        double x = static_cast<double>(v) * 32768.0;
        long q = std::lround(x);
        if (q > 32767) q = 32767;
        if (q < -32768) q = -32768;
        const auto sv = static_cast<std::int16_t>(q);
        wr_u16(out, static_cast<std::uint16_t>(sv));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("wav: cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("wav: write failed for " + path.string());
}

}  // namespace lginr
