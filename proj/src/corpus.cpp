#include "posce/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "posce/error.hpp"

namespace posce {

namespace {

struct CodePoint {
    char32_t value;
    std::size_t byte_from;
    std::size_t byte_to;
};

// Malformed bytes decode as themselves so offsets stay monotone.
std::vector<CodePoint> decode_utf8(std::string_view text) {
    std::vector<CodePoint> out;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto lead = static_cast<unsigned char>(text[i]);
        std::size_t len = 1;
        char32_t cp = lead;
        if (lead >= 0xF0 && lead < 0xF8) {
            len = 4;
            cp = lead & 0x07;
        } else if (lead >= 0xE0) {
            len = 3;
            cp = lead & 0x0F;
        } else if (lead >= 0xC0) {
            len = 2;
            cp = lead & 0x1F;
        }
        if (len > 1 && i + len <= text.size()) {
            bool ok = true;
            for (std::size_t k = 1; k < len; ++k) {
                const auto cont = static_cast<unsigned char>(text[i + k]);
                if ((cont & 0xC0) != 0x80) ok = false;
                cp = (cp << 6) | (cont & 0x3F);
            }
            if (!ok) {
                len = 1;
                cp = lead;
            }
        } else {
            len = 1;
            cp = lead;
        }
        out.push_back({cp, i, i + len});
        i += len;
    }
    return out;
}

bool is_unicode_space(char32_t c) {
    switch (c) {
        case U'\t': case U'\n': case U'\v': case U'\f': case U'\r': case U' ':
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return c >= 0x2000 && c <= 0x200A;
    }
}

bool is_ascii_punct(char32_t c) { return c < 0x80 && std::ispunct(static_cast<int>(c)); }

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) {
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    }
    return out;
}

std::size_t parse_offset(std::string_view text, std::size_t line, const char* what) {
    std::size_t value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw ParseError(line, std::string("bad ") + what + " '" + std::string(text) + "'");
    }
    return value;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

}  // namespace

std::string_view to_string(Polarity polarity) {
    switch (polarity) {
        case Polarity::Positive: return "positive";
        case Polarity::Neutral: return "neutral";
        case Polarity::Negative: return "negative";
    }
    return "unknown";
}

Polarity parse_polarity(std::string_view text) {
    const auto lower = lower_ascii(text);
    if (lower == "positive") return Polarity::Positive;
    if (lower == "neutral") return Polarity::Neutral;
    if (lower == "negative") return Polarity::Negative;
    fail(ErrorKind::Validation, "unknown polarity '" + std::string(text) +
                                    "' (expected positive, neutral or negative)");
}

void Sentence::validate() const {
    if (tokens.empty()) fail(ErrorKind::Validation, "sentence '" + id + "' has no tokens");
    if (!(aspect_from < aspect_to && aspect_to <= tokens.size())) {
        fail(ErrorKind::Validation, "sentence '" + id + "' has aspect span [" +
                                        std::to_string(aspect_from) + ", " +
                                        std::to_string(aspect_to) + ") outside " +
                                        std::to_string(tokens.size()) + " tokens");
    }
}

std::vector<std::string> Corpus::vocabulary() const {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& s : sentences) {
        for (const auto& t : s.tokens) {
            if (seen.insert(t).second) out.push_back(t);
        }
    }
    return out;
}

std::vector<std::size_t> Corpus::class_histogram() const {
    std::vector<std::size_t> counts(3, 0);
    for (const auto& s : sentences) ++counts[class_index(s.polarity)];
    return counts;
}

void Corpus::validate() const {
    std::unordered_set<std::string> ids;
    for (const auto& s : sentences) {
        s.validate();
        if (!ids.insert(s.id).second) fail(ErrorKind::Validation, "duplicate sentence id '" + s.id + "'");
    }
}

std::vector<Token> tokenize_with_offsets(std::string_view text) {
    const auto cps = decode_utf8(text);
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < cps.size()) {
        while (i < cps.size() && is_unicode_space(cps[i].value)) ++i;
        std::size_t from = i;
        while (i < cps.size() && !is_unicode_space(cps[i].value)) ++i;
        std::size_t to = i;
        while (from < to && is_ascii_punct(cps[from].value)) ++from;
        while (to > from && is_ascii_punct(cps[to - 1].value)) --to;
        if (from == to) continue;
        const auto bytes = text.substr(cps[from].byte_from, cps[to - 1].byte_to - cps[from].byte_from);
        out.push_back({lower_ascii(bytes), from, to});
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    for (auto& t : tokenize_with_offsets(text)) out.push_back(std::move(t.text));
    return out;
}

Sentence sentence_from_record(std::string id, std::string_view text, std::size_t char_from,
                              std::size_t char_to, std::string_view polarity) {
    const std::size_t text_len = decode_utf8(text).size();
    if (char_from >= char_to || char_to > text_len) {
        fail(ErrorKind::Validation, "aspect span [" + std::to_string(char_from) + ", " +
                                        std::to_string(char_to) + ") lies outside the " +
                                        std::to_string(text_len) + "-character text");
    }
    Sentence s;
    s.id = std::move(id);
    s.polarity = parse_polarity(polarity);
    const auto tokens = tokenize_with_offsets(text);
    std::optional<std::size_t> first;
    std::size_t last = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        s.tokens.push_back(tokens[i].text);
        if (tokens[i].char_from < char_to && char_from < tokens[i].char_to) {
            if (!first) first = i;
            last = i;
        }
    }
    if (!first) {
        fail(ErrorKind::Validation, "aspect span [" + std::to_string(char_from) + ", " +
                                        std::to_string(char_to) + ") covers no token");
    }
    s.aspect_from = *first;
    s.aspect_to = last + 1;
    return s;
}

Corpus parse_dataset(std::istream& in, DatasetFormat format, Split split) {
    Corpus corpus;
    corpus.split = split;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;

        const bool json = format == DatasetFormat::Jsonl ||
                          (format == DatasetFormat::Auto && line[first] == '{');
        std::string id, text, polarity;
        std::size_t from = 0, to = 0;
        if (json) {
            try {
                const auto record = nlohmann::json::parse(line);
                id = record.at("id").get<std::string>();
                text = record.at("text").get<std::string>();
                from = record.at("from").get<std::size_t>();
                to = record.at("to").get<std::size_t>();
                polarity = record.at("polarity").get<std::string>();
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(line_no, std::string("bad JSON record: ") + e.what());
            }
        } else {
            const auto fields = split_tabs(line);
            if (fields.size() != 5) {
                throw ParseError(line_no, "expected 5 tab-separated fields, found " +
                                              std::to_string(fields.size()));
            }
            id = std::string(fields[0]);
            text = std::string(fields[1]);
            from = parse_offset(fields[2], line_no, "aspect_char_from");
            to = parse_offset(fields[3], line_no, "aspect_char_to");
            polarity = std::string(fields[4]);
        }
        if (id.empty()) throw ParseError(line_no, "empty sentence id");
        if (!ids.insert(id).second) throw ParseError(line_no, "duplicate sentence id '" + id + "'");
        try {
            corpus.sentences.push_back(sentence_from_record(id, text, from, to, polarity));
        } catch (const Error& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return corpus;
}

Corpus load_dataset(const std::filesystem::path& path, DatasetFormat format, Split split) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open dataset " + path.string());
    try {
        return parse_dataset(in, format, split);
    } catch (const ParseError& e) {
        throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
    }
}

void write_dataset(std::ostream& out, const Corpus& corpus) {
    for (const auto& s : corpus.sentences) {
        std::string text;
        std::size_t from = 0, to = 0;
        for (std::size_t i = 0; i < s.tokens.size(); ++i) {
            if (i > 0) text += ' ';
            if (i == s.aspect_from) from = decode_utf8(text).size();
            text += s.tokens[i];
            if (i + 1 == s.aspect_to) to = decode_utf8(text).size();
        }
        out << s.id << '\t' << text << '\t' << from << '\t' << to << '\t' << to_string(s.polarity)
            << '\n';
    }
}

}  // namespace posce
