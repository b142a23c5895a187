#include "bgsnetd/depth_io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

namespace bgsnetd {

namespace fs = std::filesystem;

namespace {

struct PgmImage {
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::vector<std::uint8_t> payload;  // raw sample bytes after the header
};

std::vector<std::uint8_t> read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& header, const std::vector<std::uint8_t>& payload)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

// Header tokens are separated by whitespace; '#' starts a comment running to end of line.
class HeaderReader {
public:
    HeaderReader(const std::vector<std::uint8_t>& bytes, const fs::path& path) : bytes_(bytes), path_(path) {}

    std::string token()
    {
        skip_space_and_comments();
        std::string tok;
        while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') {
            tok.push_back(static_cast<char>(bytes_[pos_++]));
        }
        if (tok.empty()) {
            fail("unexpected end of header");
        }
        return tok;
    }

    int positive_int()
    {
        const std::string tok = token();
        if (!std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) ||
            tok.size() > 9) {
            fail("bad numeric field '" + tok + "'");
        }
        const int v = std::stoi(tok);
        if (v <= 0) {
            fail("non-positive numeric field");
        }
        return v;
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t raster_offset()
    {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            fail("missing whitespace before raster");
        }
        return pos_ + 1;
    }

    [[noreturn]] void fail(const std::string& why) const
    {
        throw ParseError(ParseErrorKind::MalformedHeader, "malformed PGM header in " + path_.string() + ": " + why);
    }

private:
    void skip_space_and_comments()
    {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') {
                    ++pos_;
                }
            } else {
                break;
            }
        }
    }

    const std::vector<std::uint8_t>& bytes_;
    const fs::path& path_;
    std::size_t pos_ = 0;
};

PgmImage read_pgm(const fs::path& path, int expected_maxval)
{
    const std::vector<std::uint8_t> bytes = read_file(path);
    HeaderReader header(bytes, path);
    if (header.token() != "P5") {
        header.fail("magic is not P5");
    }
    PgmImage img;
    img.width = header.positive_int();
    img.height = header.positive_int();
    img.maxval = header.positive_int();
    if (img.maxval > 65535) {
        header.fail("maxval out of range");
    }
    const std::size_t offset = header.raster_offset();
    if (img.maxval != expected_maxval) {
        throw ParseError(ParseErrorKind::UnsupportedMaxval, "unsupported maxval " + std::to_string(img.maxval) + " in " +
                                                                path.string() + " (expected " +
                                                                std::to_string(expected_maxval) + ")");
    }
    const std::size_t bytes_per_sample = img.maxval > 255 ? 2 : 1;
    const std::size_t need = static_cast<std::size_t>(img.width) * img.height * bytes_per_sample;
    if (bytes.size() - offset < need) {
        throw ParseError(ParseErrorKind::Truncated, "truncated PGM data in " + path.string() + ": expected " +
                                                        std::to_string(need) + " bytes, found " +
                                                        std::to_string(bytes.size() - offset));
    }
    img.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                       bytes.begin() + static_cast<std::ptrdiff_t>(offset + need));
    return img;
}

std::string pgm_header(int width, int height, int maxval)
{
    return "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n" + std::to_string(maxval) + "\n";
}

}  // namespace

std::optional<GtLabel> decode_gt(std::uint8_t code) noexcept
{
    switch (code) {
        case kCodeBackground: return GtLabel::Background;
        case kCodeShadow: return GtLabel::Shadow;
        case kCodeOutsideRoi: return GtLabel::OutsideRoi;
        case kCodeUnknown: return GtLabel::Unknown;
        case kCodeForeground: return GtLabel::Foreground;
        default: return std::nullopt;
    }
}

std::uint8_t encode_gt(GtLabel label) noexcept
{
    switch (label) {
        case GtLabel::Background: return kCodeBackground;
        case GtLabel::Shadow: return kCodeShadow;
        case GtLabel::OutsideRoi: return kCodeOutsideRoi;
        case GtLabel::Unknown: return kCodeUnknown;
        case GtLabel::Foreground: return kCodeForeground;
    }
    return kCodeBackground;
}

DepthFrame load_depth_frame(const fs::path& path)
{
    const PgmImage img = read_pgm(path, 65535);
    DepthFrame frame(img.width, img.height);
    for (std::size_t k = 0; k < frame.size(); ++k) {
        frame.data[k] = static_cast<std::uint16_t>((img.payload[2 * k] << 8) | img.payload[2 * k + 1]);
    }
    return frame;
}

void save_depth_frame(const DepthFrame& frame, const fs::path& path)
{
    std::vector<std::uint8_t> payload(frame.size() * 2);
    for (std::size_t k = 0; k < frame.size(); ++k) {
        payload[2 * k] = static_cast<std::uint8_t>(frame.data[k] >> 8);
        payload[2 * k + 1] = static_cast<std::uint8_t>(frame.data[k] & 0xFF);
    }
    write_file(path, pgm_header(frame.width, frame.height, 65535), payload);
}

Grid<std::uint8_t> load_gray8(const fs::path& path)
{
    PgmImage img = read_pgm(path, 255);
    return {img.width, img.height, std::move(img.payload)};
}

void save_gray8(const Grid<std::uint8_t>& img, const fs::path& path)
{
    write_file(path, pgm_header(img.width, img.height, 255), img.data);
}

GtFrame load_groundtruth(const fs::path& path)
{
    const Grid<std::uint8_t> raw = load_gray8(path);
    GtFrame gt(raw.width, raw.height);
    for (int r = 0; r < raw.height; ++r) {
        for (int c = 0; c < raw.width; ++c) {
            const auto label = decode_gt(raw(r, c));
            if (!label) {
                throw ParseError(ParseErrorKind::UnknownCode, "unknown ground-truth code " + std::to_string(raw(r, c)) +
                                                                  " at row " + std::to_string(r) + ", col " +
                                                                  std::to_string(c) + " in " + path.string());
            }
            gt(r, c) = *label;
        }
    }
    return gt;
}

void save_groundtruth(const GtFrame& gt, const fs::path& path)
{
    Grid<std::uint8_t> raw(gt.width, gt.height);
    std::transform(gt.data.begin(), gt.data.end(), raw.data.begin(), encode_gt);
    save_gray8(raw, path);
}

MaskFrame load_mask(const fs::path& path)
{
    const Grid<std::uint8_t> raw = load_gray8(path);
    MaskFrame mask(raw.width, raw.height);
    std::transform(raw.data.begin(), raw.data.end(), mask.data.begin(),
                   [](std::uint8_t v) { return v == 0 ? Mask::BG : Mask::FG; });
    return mask;
}

void save_mask(const MaskFrame& mask, const fs::path& path)
{
    Grid<std::uint8_t> raw(mask.width, mask.height);
    std::transform(mask.data.begin(), mask.data.end(), raw.data.begin(),
                   [](Mask m) { return m == Mask::FG ? std::uint8_t{255} : std::uint8_t{0}; });
    save_gray8(raw, path);
}

std::string frame_file_name(std::size_t index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu.pgm", index);
    return buf;
}

void VideoSequence::validate() const
{
    if (frames.empty()) {
        throw DataError("sequence '" + name + "' has no frames");
    }
    for (const DepthFrame& f : frames) {
        require_same_shape(f, frames.front(), "depth frames of one sequence differ in size");
    }
    if (!gt.empty()) {
        if (gt.size() != frames.size()) {
            throw DataError("ground-truth count mismatch: " + std::to_string(gt.size()) + " gt files for " +
                            std::to_string(frames.size()) + " frames");
        }
        for (const GtFrame& g : gt) {
            require_same_shape(g, frames.front(), "ground truth differs in size from depth frames");
        }
    }
    if (roi) {
        require_same_shape(*roi, frames.front(), "ROI differs in size from depth frames");
    }
}

namespace {

std::vector<fs::path> sorted_pgms(const fs::path& dir)
{
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    return files;
}

}  // namespace

VideoSequence load_sequence(const fs::path& dir)
{
    const fs::path depth_dir = dir / "depth";
    if (!fs::is_directory(depth_dir)) {
        throw IoError("missing depth directory " + depth_dir.string());
    }
    VideoSequence seq;
    seq.name = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
    for (const fs::path& p : sorted_pgms(depth_dir)) {
        seq.frames.push_back(load_depth_frame(p));
    }
    if (seq.frames.empty()) {
        throw DataError("no depth frames in " + depth_dir.string());
    }
    if (fs::is_directory(dir / "gt")) {
        for (const fs::path& p : sorted_pgms(dir / "gt")) {
            seq.gt.push_back(load_groundtruth(p));
        }
    }
    if (fs::exists(dir / "ROI.pgm")) {
        seq.roi = load_mask(dir / "ROI.pgm");
    }
    seq.validate();
    return seq;
}

void save_sequence(const VideoSequence& seq, const fs::path& dir)
{
    seq.validate();
    fs::create_directories(dir / "depth");
    for (std::size_t k = 0; k < seq.frames.size(); ++k) {
        save_depth_frame(seq.frames[k], dir / "depth" / frame_file_name(k));
    }
    if (seq.has_gt()) {
        fs::create_directories(dir / "gt");
        for (std::size_t k = 0; k < seq.gt.size(); ++k) {
            save_groundtruth(seq.gt[k], dir / "gt" / frame_file_name(k));
        }
    }
    if (seq.roi) {
        save_mask(*seq.roi, dir / "ROI.pgm");
    }
}

}  // namespace bgsnetd
