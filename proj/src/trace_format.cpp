#include "mechdet/trace_format.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "mechdet/error.hpp"

namespace mechdet {

namespace {

constexpr std::array kAllCodes = {
    codes::kMetaDims,      codes::kSpanListEmpty,  codes::kSpanBounds,    codes::kSpanOrder,
    codes::kSpanTextRange, codes::kLabelConfidence, codes::kResponseLabelMismatch,
    codes::kTensorMissing, codes::kTokenMapSize,   codes::kSpanIndexRange, codes::kAttnShape,
    codes::kAttnNonFinite, codes::kAttnNegative,   codes::kAttnRowSum,    codes::kResidShape,
    codes::kResidNonFinite, codes::kEmbShape,      codes::kEmbNonFinite,  codes::kEmbZero,
};

constexpr std::array<std::string_view, 5> kRequiredTensors = {"attention", "x_mid", "x_post", "ctx_emb", "resp_emb"};

class ReportBuilder {
public:
    void add(std::string_view code, std::string message) {
        report_.issues.push_back({std::string(code), std::move(message)});
    }
    ValidationReport take() { return std::move(report_); }

private:
    ValidationReport report_;
};

std::size_t product(const std::vector<std::int64_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) {
        n *= static_cast<std::size_t>(std::max<std::int64_t>(d, 0));
    }
    return n;
}

bool shape_is(const FloatTensor& t, std::initializer_list<std::int64_t> dims) {
    return t.shape == std::vector<std::int64_t>(dims) && t.values.size() == product(t.shape);
}

bool all_finite(const std::vector<float>& v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

bool has_visible_text(std::string_view text) {
    return std::any_of(text.begin(), text.end(), [](char c) { return !std::isspace(static_cast<unsigned char>(c)); });
}

void check_span_list(ReportBuilder& rb, const std::vector<Span>& spans, std::size_t text_len, std::string_view what) {
    const Span* prev = nullptr;
    bool order_reported = false;
    for (std::size_t i = 0; i < spans.size(); ++i) {
        const Span& s = spans[i];
        if (s.start < 0 || s.start >= s.end) {
            rb.add(codes::kSpanBounds, std::string(what) + " span " + std::to_string(i) + " is not a non-empty range");
            continue;
        }
        if (static_cast<std::size_t>(s.end) > text_len) {
            rb.add(codes::kSpanTextRange, std::string(what) + " span " + std::to_string(i) + " ends past the text");
        }
        if (prev != nullptr && s.start < prev->end && !order_reported) {
            rb.add(codes::kSpanOrder, std::string(what) + " spans overlap or are unsorted at index " + std::to_string(i));
            order_reported = true;
        }
        prev = &s;
    }
}

void check_token_map(ReportBuilder& rb, const std::vector<std::int64_t>& map, std::size_t n_spans, std::string_view what) {
    if (n_spans == 0) return;  // already reported as SPAN_LIST_EMPTY
    for (std::size_t t = 0; t < map.size(); ++t) {
        if (map[t] < 0 || static_cast<std::size_t>(map[t]) >= n_spans) {
            rb.add(codes::kSpanIndexRange, std::string(what) + " token " + std::to_string(t) + " maps to span " +
                                               std::to_string(map[t]) + " outside [0, " + std::to_string(n_spans) + ")");
            return;
        }
    }
}

void check_attention(ReportBuilder& rb, const ActivationTrace& tr, std::int64_t n_tokens) {
    const auto& m = tr.meta;
    const auto& a = tr.attention;
    const bool token = m.attention_granularity == Granularity::token;
    const std::int64_t rows = token ? n_tokens : static_cast<std::int64_t>(m.n_response_chunks());
    const bool rank_ok = a.shape.size() == 4 && a.values.size() == product(a.shape);
    const bool dims_ok = rank_ok && a.shape[0] == m.n_layers && a.shape[1] == m.n_heads && a.shape[2] == rows &&
                         (token ? a.shape[3] >= 1 : a.shape[3] == static_cast<std::int64_t>(m.n_context_chunks()));
    if (!token && (m.prompt_spans.empty() || m.response_spans.empty())) return;  // SPAN_LIST_EMPTY covers it
    if (!dims_ok) {
        rb.add(codes::kAttnShape, "attention tensor shape does not match the trace metadata");
        return;
    }
    if (token && m.ctx_token_to_span.size() != static_cast<std::size_t>(a.shape[3])) {
        rb.add(codes::kTokenMapSize, "ctx_token_to_span length differs from the attention context dimension");
    }
    if (!all_finite(a.values)) {
        rb.add(codes::kAttnNonFinite, "attention contains NaN or Inf");
        return;
    }
    if (std::any_of(a.values.begin(), a.values.end(), [](float v) { return v < 0.0f; })) {
        rb.add(codes::kAttnNegative, "attention contains negative weights");
    }
    if (token) {
        const auto cols = static_cast<std::size_t>(a.shape[3]);
        for (std::size_t r = 0; r * cols < a.values.size(); ++r) {
            double sum = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
                sum += a.values[r * cols + c];
            }
            if (sum > 1.0 + kAttentionRowSumTolerance) {
                rb.add(codes::kAttnRowSum, "attention row " + std::to_string(r) + " sums to " + std::to_string(sum));
                break;
            }
        }
    }
}

void check_embeddings(ReportBuilder& rb, const ActivationTrace& tr) {
    const auto& m = tr.meta;
    const auto M = static_cast<std::int64_t>(m.n_context_chunks());
    const auto J = static_cast<std::int64_t>(m.n_response_chunks());
    const auto d = tr.ctx_emb.dim(1);
    if (!(d > 0 && shape_is(tr.ctx_emb, {M, d}) && shape_is(tr.resp_emb, {J, d}))) {
        rb.add(codes::kEmbShape, "chunk embedding shapes must be [M][d] and [J][d] with a shared d > 0");
        return;
    }
    if (!all_finite(tr.ctx_emb.values) || !all_finite(tr.resp_emb.values)) {
        rb.add(codes::kEmbNonFinite, "chunk embeddings contain NaN or Inf");
        return;
    }
    auto check_zero = [&](const FloatTensor& emb, const std::vector<Span>& spans, const std::string& text,
                          std::string_view what) {
        for (std::size_t i = 0; i < spans.size(); ++i) {
            const auto* row = emb.values.data() + i * static_cast<std::size_t>(d);
            const bool zero = std::all_of(row, row + d, [](float v) { return v == 0.0f; });
            if (zero && has_visible_text(utf8_slice(text, spans[i].start, spans[i].end))) {
                rb.add(codes::kEmbZero, std::string(what) + " chunk " + std::to_string(i) +
                                            " has a zero embedding but non-empty text");
                return;
            }
        }
    };
    check_zero(tr.ctx_emb, m.prompt_spans, m.prompt_text, "context");
    check_zero(tr.resp_emb, m.response_spans, m.response_text, "response");
}

nlohmann::json span_to_json(const Span& s) { return nlohmann::json::array({s.start, s.end}); }

Span span_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2) {
        throw FormatError("BAD_HEADER", "span must be a [start, end] pair");
    }
    return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>()};
}

std::string_view to_string(Granularity g) { return g == Granularity::token ? "token" : "chunk"; }

Granularity parse_granularity(const std::string& s) {
    if (s == "token") return Granularity::token;
    if (s == "chunk") return Granularity::chunk;
    throw FormatError("BAD_HEADER", "unknown attention granularity '" + s + "'");
}

FloatTensor tensor_from_blob(const TensorBlob& b) {
    if (b.dtype != DType::f16 && b.dtype != DType::f32) {
        throw FormatError("BAD_DTYPE", "tensor '" + b.name + "' must be f16 or f32");
    }
    return {b.shape, unpack_floats(b), b.dtype};
}

TensorBlob blob_from_tensor(std::string name, const FloatTensor& t) {
    return pack_floats(std::move(name), t.storage, t.shape, t.values);
}

}  // namespace

std::span<const std::string_view> all_validation_codes() { return kAllCodes; }

bool ValidationReport::has(std::string_view code) const {
    return std::any_of(issues.begin(), issues.end(), [&](const ValidationIssue& i) { return i.code == code; });
}

std::vector<std::string> ValidationReport::codes() const {
    std::set<std::string> s;
    for (const auto& i : issues) {
        s.insert(i.code);
    }
    return {s.begin(), s.end()};
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < issues.size(); ++i) {
        os << (i ? "; " : "") << issues[i].code << ": " << issues[i].message;
    }
    return os.str();
}

std::size_t utf8_length(std::string_view s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string utf8_slice(std::string_view s, std::int64_t start, std::int64_t end) {
    std::size_t cp = 0;
    std::size_t begin_byte = s.size();
    std::size_t end_byte = s.size();
    for (std::size_t i = 0; i <= s.size(); ++i) {
        const bool boundary = i == s.size() || (static_cast<unsigned char>(s[i]) & 0xC0) != 0x80;
        if (!boundary) {
            continue;
        }
        if (static_cast<std::int64_t>(cp) == start) begin_byte = i;
        if (static_cast<std::int64_t>(cp) == end) {
            end_byte = i;
            break;
        }
        ++cp;
    }
    if (begin_byte >= end_byte) {
        return {};
    }
    return std::string(s.substr(begin_byte, end_byte - begin_byte));
}

ValidationReport validate_trace(const ActivationTrace& tr) {
    ReportBuilder rb;
    const auto& m = tr.meta;

    if (m.n_layers <= 0 || m.n_heads <= 0 || m.d_model <= 0 || m.vocab_size <= 0) {
        rb.add(codes::kMetaDims, "n_layers, n_heads, d_model and vocab_size must be positive");
    }
    if (m.prompt_spans.empty() || m.response_spans.empty()) {
        rb.add(codes::kSpanListEmpty, "a trace needs at least one context chunk and one response chunk");
    }
    check_span_list(rb, m.prompt_spans, utf8_length(m.prompt_text), "prompt");
    check_span_list(rb, m.response_spans, utf8_length(m.response_text), "response");

    const std::size_t response_len = utf8_length(m.response_text);
    for (std::size_t i = 0; i < m.span_labels.size(); ++i) {
        const auto& l = m.span_labels[i];
        if (l.span.start < 0 || l.span.start >= l.span.end) {
            rb.add(codes::kSpanBounds, "label " + std::to_string(i) + " is not a non-empty range");
        } else if (static_cast<std::size_t>(l.span.end) > response_len) {
            rb.add(codes::kSpanTextRange, "label " + std::to_string(i) + " ends past the response text");
        }
        if (!(l.confidence >= 0.0 && l.confidence <= 1.0)) {
            rb.add(codes::kLabelConfidence, "label " + std::to_string(i) + " confidence outside [0, 1]");
        }
    }
    if (m.response_label) {
        bool any = false;
        for (const auto& s : m.response_spans) {
            for (const auto& l : m.span_labels) {
                any = any || overlaps(s, l.span);
            }
        }
        if (*m.response_label != (any ? 1 : 0)) {
            rb.add(codes::kResponseLabelMismatch,
                   "response_label " + std::to_string(*m.response_label) + " disagrees with the span labels");
        }
    }

    check_token_map(rb, m.token_to_span, m.n_response_chunks(), "response");
    if (m.attention_granularity == Granularity::token) {
        check_token_map(rb, m.ctx_token_to_span, m.n_context_chunks(), "context");
    }

    bool missing[kRequiredTensors.size()];
    const FloatTensor* tensors[] = {&tr.attention, &tr.x_mid, &tr.x_post, &tr.ctx_emb, &tr.resp_emb};
    for (std::size_t i = 0; i < kRequiredTensors.size(); ++i) {
        missing[i] = tensors[i]->empty();
        if (missing[i]) {
            rb.add(codes::kTensorMissing, "required tensor '" + std::string(kRequiredTensors[i]) + "' is absent");
        }
    }

    // Residual capture fixes the response-token count everything else is checked against.
    std::int64_t n_tokens = static_cast<std::int64_t>(m.n_response_tokens());
    if (!missing[1] && !missing[2]) {
        const auto& x = tr.x_mid;
        if (!(x.shape.size() == 3 && shape_is(x, {m.n_layers, x.dim(1), m.d_model}) && x.dim(1) >= 1 &&
              tr.x_post.shape == x.shape && tr.x_post.values.size() == x.values.size())) {
            rb.add(codes::kResidShape, "x_mid / x_post must both be [L][n_resp_tokens][d_model]");
        } else {
            n_tokens = x.dim(1);
            if (m.token_to_span.size() != static_cast<std::size_t>(n_tokens)) {
                rb.add(codes::kTokenMapSize, "token_to_span has " + std::to_string(m.token_to_span.size()) +
                                                 " entries for " + std::to_string(n_tokens) + " response tokens");
            }
            if (!all_finite(x.values) || !all_finite(tr.x_post.values)) {
                rb.add(codes::kResidNonFinite, "residual capture contains NaN or Inf");
            }
        }
    }
    if (!missing[0]) {
        check_attention(rb, tr, n_tokens);
    }
    if (!missing[3] && !missing[4] && m.n_context_chunks() > 0 && m.n_response_chunks() > 0) {
        check_embeddings(rb, tr);
    }
    return rb.take();
}

nlohmann::json meta_to_json(const TraceMeta& m) {
    nlohmann::json prompt_spans = nlohmann::json::array();
    for (const auto& s : m.prompt_spans) prompt_spans.push_back(span_to_json(s));
    nlohmann::json response_spans = nlohmann::json::array();
    for (const auto& s : m.response_spans) response_spans.push_back(span_to_json(s));
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& l : m.span_labels) {
        labels.push_back({{"start", l.span.start},
                          {"end", l.span.end},
                          {"confidence", l.confidence},
                          {"source", l.source == LabelSource::dataset ? "dataset" : "predicted"}});
    }
    return {
        {"trace_id", m.trace_id},
        {"model_name", m.model_name},
        {"n_layers", m.n_layers},
        {"n_heads", m.n_heads},
        {"d_model", m.d_model},
        {"vocab_size", m.vocab_size},
        {"prompt_text", m.prompt_text},
        {"response_text", m.response_text},
        {"prompt_spans", prompt_spans},
        {"response_spans", response_spans},
        {"span_labels", labels},
        {"response_label", m.response_label ? nlohmann::json(*m.response_label) : nlohmann::json(nullptr)},
        {"token_to_span", m.token_to_span},
        {"ctx_token_to_span", m.ctx_token_to_span},
        {"attention_granularity", to_string(m.attention_granularity)},
        {"encoder_name", m.encoder_name},
    };
}

TraceMeta meta_from_json(const nlohmann::json& j) {
    try {
        TraceMeta m;
        m.trace_id = j.value("trace_id", std::string{});
        m.model_name = j.at("model_name").get<std::string>();
        m.n_layers = j.at("n_layers").get<std::int64_t>();
        m.n_heads = j.at("n_heads").get<std::int64_t>();
        m.d_model = j.at("d_model").get<std::int64_t>();
        m.vocab_size = j.at("vocab_size").get<std::int64_t>();
        m.prompt_text = j.at("prompt_text").get<std::string>();
        m.response_text = j.at("response_text").get<std::string>();
        for (const auto& s : j.at("prompt_spans")) m.prompt_spans.push_back(span_from_json(s));
        for (const auto& s : j.at("response_spans")) m.response_spans.push_back(span_from_json(s));
        for (const auto& l : j.at("span_labels")) {
            const auto src = l.value("source", std::string("dataset"));
            if (src != "dataset" && src != "predicted") {
                throw FormatError("BAD_HEADER", "unknown label source '" + src + "'");
            }
            m.span_labels.push_back({{l.at("start").get<std::int64_t>(), l.at("end").get<std::int64_t>()},
                                     l.at("confidence").get<double>(),
                                     src == "dataset" ? LabelSource::dataset : LabelSource::predicted});
        }
        if (j.contains("response_label") && !j["response_label"].is_null()) {
            m.response_label = j["response_label"].get<int>();
        }
        m.token_to_span = j.at("token_to_span").get<std::vector<std::int64_t>>();
        m.ctx_token_to_span = j.value("ctx_token_to_span", std::vector<std::int64_t>{});
        m.attention_granularity = parse_granularity(j.at("attention_granularity").get<std::string>());
        m.encoder_name = j.value("encoder_name", std::string{});
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("BAD_HEADER", std::string("malformed trace metadata: ") + e.what());
    }
}

std::vector<std::byte> encode_trace(const ActivationTrace& trace) {
    const auto report = validate_trace(trace);
    if (!report.ok()) {
        throw ValidationError("INVALID_TRACE", report.summary());
    }
    Container c;
    std::copy(kTraceMagic.begin(), kTraceMagic.end(), c.magic.begin());
    c.meta = meta_to_json(trace.meta);
    c.tensors.push_back(blob_from_tensor("attention", trace.attention));
    c.tensors.push_back(blob_from_tensor("x_mid", trace.x_mid));
    c.tensors.push_back(blob_from_tensor("x_post", trace.x_post));
    c.tensors.push_back(blob_from_tensor("ctx_emb", trace.ctx_emb));
    c.tensors.push_back(blob_from_tensor("resp_emb", trace.resp_emb));
    try {
        return encode_container(c);
    } catch (const nlohmann::json::type_error& e) {
        throw InputError("BAD_TEXT", std::string("trace metadata is not valid UTF-8: ") + e.what());
    }
}

void write_trace(const ActivationTrace& trace, std::ostream& out) {
    const auto bytes = encode_trace(trace);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("WRITE_FAILED", "could not write trace");
    }
}

ActivationTrace decode_trace(std::span<const std::byte> data, bool validate) {
    const Container c = decode_container(data, kTraceMagic);
    ActivationTrace tr;
    tr.meta = meta_from_json(c.meta);
    FloatTensor* slots[] = {&tr.attention, &tr.x_mid, &tr.x_post, &tr.ctx_emb, &tr.resp_emb};
    for (std::size_t i = 0; i < kRequiredTensors.size(); ++i) {
        const TensorBlob* b = c.find(kRequiredTensors[i]);
        if (b == nullptr) {
            throw FormatError("MISSING_TENSOR", "trace lacks required tensor '" + std::string(kRequiredTensors[i]) + "'");
        }
        *slots[i] = tensor_from_blob(*b);
    }
    if (validate) {
        const auto report = validate_trace(tr);
        if (!report.ok()) {
            throw ValidationError("INVALID_TRACE", report.summary());
        }
    }
    return tr;
}

ActivationTrace read_trace(std::istream& in, bool validate) { return decode_trace(read_all(in), validate); }

void save_trace(const ActivationTrace& trace, const std::filesystem::path& path) {
    const auto bytes = encode_trace(trace);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("WRITE_FAILED", "cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("WRITE_FAILED", "could not write " + path.string());
    }
}

ActivationTrace load_trace(const std::filesystem::path& path, bool validate) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("READ_FAILED", "cannot open " + path.string());
    }
    return read_trace(in, validate);
}

std::string_view to_string(NormKind k) {
    switch (k) {
        case NormKind::rms: return "rms";
        case NormKind::layernorm: return "layernorm";
        case NormKind::none: return "none";
    }
    return "?";
}

NormKind parse_norm_kind(std::string_view s) {
    if (s == "rms") return NormKind::rms;
    if (s == "layernorm") return NormKind::layernorm;
    if (s == "none") return NormKind::none;
    throw FormatError("BAD_HEADER", "unknown norm_kind '" + std::string(s) + "'");
}

void validate_projection_head(const ProjectionHead& h) {
    auto fail = [](const std::string& msg) { throw ValidationError("HEAD_INVALID", msg); };
    if (h.vocab_size < 2) fail("vocab_size must be at least 2");
    if (h.d_model <= 0) fail("d_model must be positive");
    if (h.unembed.size() != static_cast<std::size_t>(h.vocab_size * h.d_model)) fail("unembed is not [V][d_model]");
    const auto d = static_cast<std::size_t>(h.d_model);
    if (h.norm_kind != NormKind::none && h.norm_weight.size() != d) fail("norm_weight is not [d_model]");
    if (!h.norm_bias.empty() && h.norm_bias.size() != d) fail("norm_bias is not [d_model]");
    if (!(h.norm_eps >= 0.0) || !std::isfinite(h.norm_eps)) fail("norm_eps must be finite and non-negative");
    if (!all_finite(h.unembed) || !all_finite(h.norm_weight) || !all_finite(h.norm_bias)) {
        fail("head parameters contain NaN or Inf");
    }
}

void write_projection_head(const ProjectionHead& h, std::ostream& out) {
    validate_projection_head(h);
    Container c;
    std::copy(kTraceMagic.begin(), kTraceMagic.end(), c.magic.begin());
    c.meta = {{"kind", "projection_head"},
              {"norm_kind", to_string(h.norm_kind)},
              {"norm_eps", h.norm_eps},
              {"d_model", h.d_model},
              {"vocab_size", h.vocab_size}};
    if (!h.norm_weight.empty()) {
        c.tensors.push_back(pack_floats("norm_weight", h.storage, {h.d_model}, h.norm_weight));
    }
    if (!h.norm_bias.empty()) {
        c.tensors.push_back(pack_floats("norm_bias", h.storage, {h.d_model}, h.norm_bias));
    }
    c.tensors.push_back(pack_floats("unembed", h.storage, {h.vocab_size, h.d_model}, h.unembed));
    write_container(out, c);
}

ProjectionHead load_projection_head(std::istream& in, std::int64_t expected_d_model) {
    const Container c = read_container(in, kTraceMagic);
    ProjectionHead h;
    try {
        if (c.meta.value("kind", std::string{}) != "projection_head") {
            throw FormatError("BAD_HEADER", "container is not a projection head");
        }
        h.norm_kind = parse_norm_kind(c.meta.at("norm_kind").get<std::string>());
        h.norm_eps = c.meta.value("norm_eps", 1e-6);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("BAD_HEADER", std::string("malformed head metadata: ") + e.what());
    }
    const TensorBlob* unembed = c.find("unembed");
    if (unembed == nullptr) {
        throw FormatError("MISSING_TENSOR", "projection head lacks 'unembed'");
    }
    if (unembed->shape.size() != 2) {
        throw FormatError("BAD_HEADER", "unembed must be rank 2");
    }
    h.vocab_size = unembed->shape[0];
    h.d_model = unembed->shape[1];
    h.storage = unembed->dtype;
    h.unembed = unpack_floats(*unembed);
    if (const TensorBlob* w = c.find("norm_weight")) {
        h.norm_weight = unpack_floats(*w);
    } else if (h.norm_kind != NormKind::none) {
        throw FormatError("MISSING_TENSOR", "projection head lacks 'norm_weight'");
    }
    if (const TensorBlob* b = c.find("norm_bias")) {
        h.norm_bias = unpack_floats(*b);
    }
    if (expected_d_model >= 0 && h.d_model != expected_d_model) {
        throw InputError("D_MODEL_MISMATCH", "head d_model " + std::to_string(h.d_model) + " != expected " +
                                                 std::to_string(expected_d_model));
    }
    validate_projection_head(h);
    return h;
}

void save_projection_head(const ProjectionHead& head, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("WRITE_FAILED", "cannot open " + path.string() + " for writing");
    }
    write_projection_head(head, out);
}

ProjectionHead load_projection_head(const std::filesystem::path& path, std::int64_t expected_d_model) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("READ_FAILED", "cannot open " + path.string());
    }
    return load_projection_head(in, expected_d_model);
}

}  // namespace mechdet
