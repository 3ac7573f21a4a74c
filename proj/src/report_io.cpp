#include "latim/report_io.hpp"
#include "latim/errors.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace latim {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s) {
    double v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw data_error("csv: bad number '" + s + "'");
    return v;
}

int parse_token_label(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw data_error("csv: bad position label '" + s + "'");
    return std::stoi(s.substr(colon + 1));
}

std::array<std::uint8_t, 3> palette(double t) {
    // Five viridis anchors, linearly interpolated.
    static constexpr std::array<std::array<double, 3>, 5> anchors{{{68, 1, 84},
                                                                   {59, 82, 139},
                                                                   {33, 145, 140},
                                                                   {94, 201, 98},
                                                                   {253, 231, 37}}};
    t = std::clamp(t, 0.0, 1.0) * 4.0;
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(t), 3);
    const double f = t - static_cast<double>(k);
    std::array<std::uint8_t, 3> rgb{};
    for (std::size_t c = 0; c < 3; ++c)
        rgb[c] = static_cast<std::uint8_t>(std::lround(anchors[k][c] + f * (anchors[k + 1][c] - anchors[k][c])));
    return rgb;
}

} // namespace

std::string csv_matrix::meta(const std::string& key) const {
    for (const auto& [k, v] : metadata)
        if (k == key) return v;
    return {};
}

std::string format_number(double v) {
    if (v == 0) return "0";
    std::array<char, 64> buf{};
    const auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) throw numeric_error("cannot format number");
    return std::string(buf.data(), p);
}

std::string to_csv(const csv_matrix& m, bool causal) {
    const index_t n = m.values.rows();
    if (m.values.cols() != n || static_cast<index_t>(m.tokens.size()) != n)
        throw data_error("csv: matrix must be N x N with one token per position");
    std::ostringstream os;
    for (const auto& [k, v] : m.metadata) os << "# " << k << "=" << v << "\n";
    os << "target\\source";
    for (index_t j = 0; j < n; ++j) os << "," << j << ":" << m.tokens[static_cast<std::size_t>(j)];
    os << "\n";
    for (index_t i = 0; i < n; ++i) {
        os << i << ":" << m.tokens[static_cast<std::size_t>(i)];
        for (index_t j = 0; j < n; ++j) os << "," << ((causal && j > i) ? std::string("0") : format_number(m.values(i, j)));
        os << "\n";
    }
    return os.str();
}

csv_matrix parse_csv(const std::string& text) {
    csv_matrix m;
    std::istringstream is(text);
    std::string line;
    std::vector<std::vector<std::string>> rows;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto body = line.substr(1);
            const auto start = body.find_first_not_of(' ');
            body = start == std::string::npos ? "" : body.substr(start);
            const auto eq = body.find('=');
            if (eq == std::string::npos) m.metadata.emplace_back(body, "");
            else m.metadata.emplace_back(body.substr(0, eq), body.substr(eq + 1));
            continue;
        }
        auto cells = split(line, ',');
        if (!header_seen) {
            header_seen = true;
            for (std::size_t k = 1; k < cells.size(); ++k) m.tokens.push_back(parse_token_label(cells[k]));
            continue;
        }
        rows.push_back(std::move(cells));
    }
    if (!header_seen) throw data_error("csv: missing header row");
    const auto n = static_cast<index_t>(m.tokens.size());
    if (static_cast<index_t>(rows.size()) != n) throw data_error("csv: row count differs from header width");
    m.values.resize(n, n);
    for (index_t i = 0; i < n; ++i) {
        const auto& cells = rows[static_cast<std::size_t>(i)];
        if (static_cast<index_t>(cells.size()) != n + 1) throw data_error("csv: ragged row " + std::to_string(i));
        for (index_t j = 0; j < n; ++j) m.values(i, j) = parse_double(cells[static_cast<std::size_t>(j + 1)]);
    }
    return m;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw data_error("cannot open '" + path.string() + "' for writing");
    f << text;
    if (!f) throw data_error("write to '" + path.string() + "' failed");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw data_error("cannot open '" + path.string() + "'");
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

namespace {

void write_rgb_png(const std::filesystem::path& path, png_uint_32 width, png_uint_32 height,
                   const std::vector<std::uint8_t>& pixels) {
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
    if (!fp) throw data_error("cannot open '" + path.string() + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, nullptr);
        throw data_error("heatmap: libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw data_error("heatmap: libpng write failed");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (png_uint_32 y = 0; y < height; ++y)
        png_write_row(png, pixels.data() + static_cast<std::size_t>(y) * width * 3);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace

void write_heatmap_png(const std::filesystem::path& path, const matrix<double>& c, int cell) {
    const index_t rows = c.rows(), cols = c.cols();
    if (rows == 0 || cols == 0) throw data_error("heatmap: empty matrix");
    if (cell <= 0) cell = static_cast<int>(std::max<index_t>(1, 512 / std::max(rows, cols)));
    const auto width = static_cast<std::size_t>(cols * cell), height = static_cast<std::size_t>(rows * cell);
    std::vector<std::uint8_t> pixels(width * height * 3);
    for (index_t i = 0; i < rows; ++i) {
        const double row_max = c.row(i).cwiseAbs().maxCoeff();
        for (index_t j = 0; j < cols; ++j) {
            const auto rgb = palette(row_max > 0 ? std::abs(c(i, j)) / row_max : 0.0);
            for (int py = 0; py < cell; ++py)
                for (int px = 0; px < cell; ++px) {
                    const auto y = static_cast<std::size_t>(i * cell + py), x = static_cast<std::size_t>(j * cell + px);
                    std::copy(rgb.begin(), rgb.end(), pixels.begin() + static_cast<std::ptrdiff_t>((y * width + x) * 3));
                }
        }
    }
    write_rgb_png(path, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), pixels);
}

} // namespace latim
