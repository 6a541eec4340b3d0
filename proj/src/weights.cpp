#include "fsa/weights.hpp"

#include "fsa/errors.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>

namespace fsa {

namespace {

constexpr std::string_view kMagic = "FSAW";
constexpr std::uint8_t kVersion = 1;

enum class Tag : std::uint8_t { Conv2d = 1, Linear = 2, ReLU = 3, MaxPool2d = 4, Flatten = 5 };

// Guards against absurd counts in corrupted headers before allocating.
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint32_t kMaxCount = 1u << 16;

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
    void tensor(const Tensor& t) {
        u32(static_cast<std::uint32_t>(t.rank()));
        for (std::size_t e : t.shape()) u32(static_cast<std::uint32_t>(e));
        for (double v : t.values()) f64(v);
    }
    std::string take() { return std::move(out_); }
    void raw(std::string_view s) { out_.append(s); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    void section(std::string name) { section_ = std::move(name); }

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
        return std::bit_cast<double>(bits);
    }
    std::string_view take(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    Shape shape() {
        const std::uint32_t rank = u32();
        if (rank == 0 || rank > kMaxRank) fail("implausible rank " + std::to_string(rank));
        Shape shape(rank);
        for (auto& e : shape) {
            e = u32();
            if (e == 0) fail("zero extent");
        }
        return shape;
    }
    Tensor tensor() {
        Shape s = shape();
        const std::size_t n = element_count(s);
        if (n > remaining() / 8) fail("truncated (needs " + std::to_string(n) + " values)");
        std::vector<double> values(n);
        for (double& v : values) v = f64();
        try {
            return Tensor(std::move(s), std::move(values));
        } catch (const InvalidValueError&) {
            fail("non-finite value");
        }
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("weights file, " + section_ + ": " + what);
    }

private:
    void need(std::size_t n) {
        if (remaining() < n) fail("truncated");
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
    std::string section_ = "header";
};

std::vector<std::uint32_t> read_params(Reader& r, std::uint32_t expected) {
    const std::uint32_t count = r.u32();
    if (count != expected) {
        r.fail("expected " + std::to_string(expected) + " parameters, found " + std::to_string(count));
    }
    std::vector<std::uint32_t> params(count);
    for (auto& p : params) p = r.u32();
    return params;
}

void expect_tensor_count(Reader& r, std::uint32_t expected) {
    const std::uint32_t count = r.u32();
    if (count != expected) {
        r.fail("expected " + std::to_string(expected) + " tensors, found " + std::to_string(count));
    }
}

} // namespace

std::string serialize_weights(const Classifier& model) {
    Writer w;
    w.raw(kMagic);
    w.u8(kVersion);
    w.u32(static_cast<std::uint32_t>(model.input_shape().size()));
    for (std::size_t e : model.input_shape()) w.u32(static_cast<std::uint32_t>(e));
    w.u32(static_cast<std::uint32_t>(model.layers().size()));
    for (const Layer& layer : model.layers()) {
        if (const auto* conv = std::get_if<Conv2d>(&layer)) {
            w.u8(static_cast<std::uint8_t>(Tag::Conv2d));
            w.u32(2);
            w.u32(static_cast<std::uint32_t>(conv->stride));
            w.u32(static_cast<std::uint32_t>(conv->padding));
            w.u32(2);
            w.tensor(conv->weights);
            w.tensor(conv->bias);
        } else if (const auto* linear = std::get_if<Linear>(&layer)) {
            w.u8(static_cast<std::uint8_t>(Tag::Linear));
            w.u32(0);
            w.u32(2);
            w.tensor(linear->weights);
            w.tensor(linear->bias);
        } else if (std::holds_alternative<ReLU>(layer)) {
            w.u8(static_cast<std::uint8_t>(Tag::ReLU));
            w.u32(0);
            w.u32(0);
        } else if (const auto* pool = std::get_if<MaxPool2d>(&layer)) {
            w.u8(static_cast<std::uint8_t>(Tag::MaxPool2d));
            w.u32(1);
            w.u32(static_cast<std::uint32_t>(pool->size));
            w.u32(0);
        } else {
            w.u8(static_cast<std::uint8_t>(Tag::Flatten));
            w.u32(0);
            w.u32(0);
        }
    }
    return w.take();
}

Classifier parse_weights(std::string_view bytes) {
    Reader r(bytes);
    if (r.remaining() < kMagic.size() || r.take(kMagic.size()) != kMagic) r.fail("bad magic (expected \"FSAW\")");
    if (const auto version = r.u8(); version != kVersion) r.fail("unsupported version " + std::to_string(version));
    r.section("input shape");
    Shape input = r.shape();
    r.section("layer count");
    const std::uint32_t count = r.u32();
    if (count == 0 || count > kMaxCount) r.fail("implausible layer count " + std::to_string(count));

    std::vector<Layer> layers;
    for (std::uint32_t i = 0; i < count; ++i) {
        r.section("layer " + std::to_string(i));
        const auto tag = static_cast<Tag>(r.u8());
        switch (tag) {
        case Tag::Conv2d: {
            const auto p = read_params(r, 2);
            expect_tensor_count(r, 2);
            Tensor weights = r.tensor();
            Tensor bias = r.tensor();
            layers.emplace_back(Conv2d{std::move(weights), std::move(bias), p[0], p[1]});
            break;
        }
        case Tag::Linear: {
            read_params(r, 0);
            expect_tensor_count(r, 2);
            Tensor weights = r.tensor();
            Tensor bias = r.tensor();
            layers.emplace_back(Linear{std::move(weights), std::move(bias)});
            break;
        }
        case Tag::ReLU:
            read_params(r, 0);
            expect_tensor_count(r, 0);
            layers.emplace_back(ReLU{});
            break;
        case Tag::MaxPool2d: {
            const auto p = read_params(r, 1);
            expect_tensor_count(r, 0);
            layers.emplace_back(MaxPool2d{p[0]});
            break;
        }
        case Tag::Flatten:
            read_params(r, 0);
            expect_tensor_count(r, 0);
            layers.emplace_back(Flatten{});
            break;
        default:
            r.fail("unknown layer tag " + std::to_string(static_cast<int>(tag)));
        }
    }
    if (r.remaining() != 0) {
        r.section("trailer");
        r.fail(std::to_string(r.remaining()) + " unexpected trailing bytes");
    }
    return Classifier(std::move(input), std::move(layers));
}

void save_weights(const Classifier& model, const std::filesystem::path& path) {
    const std::string bytes = serialize_weights(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

Classifier load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse_weights(bytes);
}

} // namespace fsa
