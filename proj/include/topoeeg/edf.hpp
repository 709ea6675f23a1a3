#pragma once

// EDF reader and writer. Only plain EDF/EDF+ continuous data is supported;
// "EDF Annotations" signals are skipped when converting to a Recording.

#include "topoeeg/core.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>
#include <vector>

namespace topoeeg {

/// Multichannel recording in physical units (microvolts).
struct Recording {
    std::string patient_id;
    double sample_rate = 0.0;
    std::vector<std::string> channels;
    Matrix data;  // channels x samples

    Eigen::Index num_samples() const { return data.cols(); }
    Eigen::Index num_channels() const { return data.rows(); }

    /// Throws ValidationError when the recording invariants do not hold.
    void validate() const {
        if (!(sample_rate > 0.0)) throw ValidationError("recording '" + patient_id + "': sample_rate must be > 0");
        if (static_cast<Eigen::Index>(channels.size()) != data.rows())
            throw ValidationError("recording '" + patient_id + "': channel count does not match data rows");
        for (size_t i = 0; i < channels.size(); ++i)
            for (size_t j = i + 1; j < channels.size(); ++j)
                if (channels[i] == channels[j])
                    throw ValidationError("recording '" + patient_id + "': duplicate channel '" + channels[i] + "'");
    }
};

struct EdfSignalHeader {
    std::string label;
    std::string transducer;
    std::string physical_dimension;
    double physical_min = 0.0;
    double physical_max = 0.0;
    int digital_min = 0;
    int digital_max = 0;
    std::string prefiltering;
    int samples_per_record = 0;
    std::string reserved;

    bool is_annotation() const { return trim(label) == "EDF Annotations"; }

    /// Linear digital -> physical map.
    double to_physical(int digital) const {
        return physical_min + (static_cast<double>(digital) - digital_min) * (physical_max - physical_min) /
                                  static_cast<double>(digital_max - digital_min);
    }

    int to_digital(double physical) const {
        const double d = (physical - physical_min) * static_cast<double>(digital_max - digital_min) /
                             (physical_max - physical_min) +
                         digital_min;
        const double r = std::round(d);
        return static_cast<int>(std::clamp(r, static_cast<double>(digital_min), static_cast<double>(digital_max)));
    }
};

/// Raw EDF content: header text fields verbatim plus digital samples per signal.
struct EdfFile {
    std::string version = "0";
    std::string patient = "X X X X";
    std::string recording = "Startdate X X X X";
    std::string start_date = "01.01.00";
    std::string start_time = "00.00.00";
    std::string reserved;
    long num_records = 0;
    double record_duration = 1.0;
    std::string record_duration_text;  // verbatim field, reused on write when set
    std::vector<EdfSignalHeader> signals;
    std::vector<std::vector<std::int16_t>> samples;  // per signal, all records concatenated
};

namespace edf_detail {

inline std::string field(const std::string& bytes, size_t& pos, size_t width) {
    std::string out = bytes.substr(pos, width);
    pos += width;
    return out;
}

inline long parse_int_field(const std::string& raw, const std::string& name) {
    const std::string t = trim(raw);
    char* end = nullptr;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size())
        throw ParseError("EDF header field '" + name + "' is not an integer: '" + t + "'");
    return v;
}

inline double parse_real_field(const std::string& raw, const std::string& name) {
    const std::string t = trim(raw);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v))
        throw ParseError("EDF header field '" + name + "' is not a number: '" + t + "'");
    return v;
}

inline std::string pad(std::string s, size_t width) {
    if (s.size() > width) s.resize(width);
    s.append(width - s.size(), ' ');
    return s;
}

/// Formats a number into at most `width` characters.
inline std::string number_field(double v, size_t width) {
    if (v == std::floor(v) && std::abs(v) < 1e7) return pad(std::to_string(static_cast<long long>(v)), width);
    for (int prec = 8; prec >= 1; --prec) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strlen(buf) <= width) return pad(buf, width);
    }
    throw ValidationError("number " + std::to_string(v) + " does not fit an EDF field");
}

}  // namespace edf_detail

/// Parses the binary EDF image into raw header fields and digital samples.
inline EdfFile read_edf(const std::string& bytes) {
    using namespace edf_detail;
    if (bytes.size() < 256)
        throw ParseError("EDF header truncated: expected at least 256 bytes, got " + std::to_string(bytes.size()));
    EdfFile f;
    size_t pos = 0;
    f.version = trim(field(bytes, pos, 8));
    f.patient = trim(field(bytes, pos, 80));
    f.recording = trim(field(bytes, pos, 80));
    f.start_date = trim(field(bytes, pos, 8));
    f.start_time = trim(field(bytes, pos, 8));
    const long header_bytes = parse_int_field(field(bytes, pos, 8), "number of bytes in header record");
    f.reserved = trim(field(bytes, pos, 44));
    f.num_records = parse_int_field(field(bytes, pos, 8), "number of data records");
    f.record_duration_text = trim(field(bytes, pos, 8));
    f.record_duration = parse_real_field(f.record_duration_text, "duration of a data record");
    const long ns = parse_int_field(field(bytes, pos, 4), "number of signals");
    if (ns <= 0) throw ParseError("EDF header field 'number of signals' must be positive, got " + std::to_string(ns));
    if (header_bytes != 256 * (ns + 1))
        throw ParseError("EDF header field 'number of bytes in header record' is " + std::to_string(header_bytes) +
                         ", expected " + std::to_string(256 * (ns + 1)));
    if (bytes.size() < static_cast<size_t>(header_bytes))
        throw ParseError("EDF signal headers truncated: expected " + std::to_string(header_bytes) + " bytes, got " +
                         std::to_string(bytes.size()));
    if (!(f.record_duration > 0.0))
        throw ParseError("EDF header field 'duration of a data record' must be positive");

    const auto n = static_cast<size_t>(ns);
    f.signals.resize(n);
    auto each = [&](size_t width, auto&& apply) {
        for (size_t i = 0; i < n; ++i) apply(f.signals[i], field(bytes, pos, width), i);
    };
    const auto sig_name = [](const char* what, size_t i) { return std::string(what) + " (signal " + std::to_string(i) + ")"; };
    each(16, [](auto& s, std::string v, size_t) { s.label = trim(v); });
    each(80, [](auto& s, std::string v, size_t) { s.transducer = trim(v); });
    each(8, [](auto& s, std::string v, size_t) { s.physical_dimension = trim(v); });
    each(8, [&](auto& s, std::string v, size_t i) { s.physical_min = parse_real_field(v, sig_name("physical minimum", i)); });
    each(8, [&](auto& s, std::string v, size_t i) { s.physical_max = parse_real_field(v, sig_name("physical maximum", i)); });
    each(8, [&](auto& s, std::string v, size_t i) {
        s.digital_min = static_cast<int>(parse_int_field(v, sig_name("digital minimum", i)));
    });
    each(8, [&](auto& s, std::string v, size_t i) {
        s.digital_max = static_cast<int>(parse_int_field(v, sig_name("digital maximum", i)));
    });
    each(80, [](auto& s, std::string v, size_t) { s.prefiltering = trim(v); });
    each(8, [&](auto& s, std::string v, size_t i) {
        s.samples_per_record = static_cast<int>(parse_int_field(v, sig_name("number of samples in each data record", i)));
        if (s.samples_per_record <= 0)
            throw ParseError("EDF header field '" + sig_name("number of samples in each data record", i) +
                             "' must be positive");
    });
    each(32, [](auto& s, std::string v, size_t) { s.reserved = trim(v); });

    size_t record_samples = 0;
    for (const auto& s : f.signals) record_samples += static_cast<size_t>(s.samples_per_record);
    const size_t record_bytes = 2 * record_samples;
    const size_t available = bytes.size() - static_cast<size_t>(header_bytes);
    if (f.num_records < 0) f.num_records = static_cast<long>(available / record_bytes);
    const size_t expected = record_bytes * static_cast<size_t>(f.num_records);
    if (available < expected)
        throw ParseError("EDF data records truncated: expected " + std::to_string(expected) + " bytes, got " +
                         std::to_string(available));

    f.samples.assign(n, {});
    for (size_t i = 0; i < n; ++i)
        f.samples[i].reserve(static_cast<size_t>(f.signals[i].samples_per_record) * static_cast<size_t>(f.num_records));
    const auto* data = reinterpret_cast<const unsigned char*>(bytes.data()) + header_bytes;
    size_t off = 0;
    for (long r = 0; r < f.num_records; ++r) {
        for (size_t i = 0; i < n; ++i) {
            for (int k = 0; k < f.signals[i].samples_per_record; ++k) {
                const auto u = static_cast<std::uint16_t>(data[off] | (data[off + 1] << 8));
                f.samples[i].push_back(static_cast<std::int16_t>(u));
                off += 2;
            }
        }
    }
    return f;
}

/// Serializes an EdfFile back to bytes. Header fields are space padded.
inline std::string write_edf(const EdfFile& f) {
    using namespace edf_detail;
    const size_t n = f.signals.size();
    if (n == 0) throw ValidationError("EDF file needs at least one signal");
    std::string out;
    out.reserve(256 * (n + 1));
    out += pad(f.version, 8);
    out += pad(f.patient, 80);
    out += pad(f.recording, 80);
    out += pad(f.start_date, 8);
    out += pad(f.start_time, 8);
    out += number_field(static_cast<double>(256 * (n + 1)), 8);
    out += pad(f.reserved, 44);
    out += number_field(static_cast<double>(f.num_records), 8);
    out += f.record_duration_text.empty() ? number_field(f.record_duration, 8) : pad(f.record_duration_text, 8);
    out += number_field(static_cast<double>(n), 4);
    for (const auto& s : f.signals) out += pad(s.label, 16);
    for (const auto& s : f.signals) out += pad(s.transducer, 80);
    for (const auto& s : f.signals) out += pad(s.physical_dimension, 8);
    for (const auto& s : f.signals) out += number_field(s.physical_min, 8);
    for (const auto& s : f.signals) out += number_field(s.physical_max, 8);
    for (const auto& s : f.signals) out += number_field(s.digital_min, 8);
    for (const auto& s : f.signals) out += number_field(s.digital_max, 8);
    for (const auto& s : f.signals) out += pad(s.prefiltering, 80);
    for (const auto& s : f.signals) out += number_field(s.samples_per_record, 8);
    for (const auto& s : f.signals) out += pad(s.reserved, 32);

    for (size_t i = 0; i < n; ++i) {
        if (f.samples[i].size() != static_cast<size_t>(f.signals[i].samples_per_record) * static_cast<size_t>(f.num_records))
            throw ValidationError("EDF signal '" + f.signals[i].label + "' sample count does not match header");
    }
    for (long r = 0; r < f.num_records; ++r) {
        for (size_t i = 0; i < n; ++i) {
            const auto spr = static_cast<size_t>(f.signals[i].samples_per_record);
            for (size_t k = 0; k < spr; ++k) {
                const auto u = static_cast<std::uint16_t>(f.samples[i][static_cast<size_t>(r) * spr + k]);
                out.push_back(static_cast<char>(u & 0xff));
                out.push_back(static_cast<char>(u >> 8));
            }
        }
    }
    return out;
}

/// Converts raw EDF content to a Recording in physical units.
inline Recording to_recording(const EdfFile& f, std::string patient_id = {}) {
    Recording rec;
    rec.patient_id = patient_id.empty() ? f.patient : std::move(patient_id);
    std::vector<size_t> keep;
    for (size_t i = 0; i < f.signals.size(); ++i)
        if (!f.signals[i].is_annotation()) keep.push_back(i);
    if (keep.empty()) throw ParseError("EDF file has no data signals");
    const int spr = f.signals[keep.front()].samples_per_record;
    for (size_t i : keep) {
        const auto& s = f.signals[i];
        if (s.digital_max == s.digital_min)
            throw NumericError("EDF scaling error: signal '" + s.label + "' has digital minimum == digital maximum (" +
                               std::to_string(s.digital_min) + ")");
        if (s.samples_per_record != spr)
            throw ParseError("EDF signal '" + s.label + "' has " + std::to_string(s.samples_per_record) +
                             " samples per record, expected " + std::to_string(spr) +
                             " (mixed sample rates are not supported)");
    }
    rec.sample_rate = spr / f.record_duration;
    const auto total = static_cast<Eigen::Index>(spr) * f.num_records;
    rec.data.resize(static_cast<Eigen::Index>(keep.size()), total);
    for (size_t c = 0; c < keep.size(); ++c) {
        const auto& s = f.signals[keep[c]];
        rec.channels.push_back(s.label);
        for (Eigen::Index t = 0; t < total; ++t)
            rec.data(static_cast<Eigen::Index>(c), t) = s.to_physical(f.samples[keep[c]][static_cast<size_t>(t)]);
    }
    rec.validate();
    return rec;
}

inline Recording parse_edf(const std::string& bytes, std::string patient_id = {}) {
    return to_recording(read_edf(bytes), std::move(patient_id));
}

/// Quantizes a recording to 16-bit EDF. Physical range per channel is the
/// data range (widened to +-1 when flat). Used for fixtures and `synth`.
inline EdfFile make_edf(const Recording& rec) {
    rec.validate();
    EdfFile f;
    f.patient = rec.patient_id.empty() ? "X" : rec.patient_id;
    const double rate = rec.sample_rate;
    if (rate != std::floor(rate)) throw ValidationError("EDF writer needs an integral sample rate");
    const auto n = static_cast<long>(rec.num_samples());
    long spr = std::gcd(n, static_cast<long>(rate));
    if (spr == 0) spr = 1;
    f.num_records = n / spr;
    f.record_duration = static_cast<double>(spr) / rate;
    f.record_duration_text = trim(edf_detail::number_field(f.record_duration, 8));
    for (Eigen::Index c = 0; c < rec.num_channels(); ++c) {
        EdfSignalHeader s;
        s.label = rec.channels[static_cast<size_t>(c)];
        s.physical_dimension = "uV";
        double lo = rec.data.row(c).minCoeff(), hi = rec.data.row(c).maxCoeff();
        if (hi - lo < 1e-9) {
            lo -= 1.0;
            hi += 1.0;
        }
        // The header stores 8 characters; use the re-parsed text so the
        // scaling written equals the scaling applied, widening until it covers the data.
        double margin = 0.0;
        for (;;) {
            const double span = hi - lo;
            s.physical_min = std::strtod(edf_detail::number_field(std::floor((lo - margin) * 100.0) / 100.0, 8).c_str(), nullptr);
            s.physical_max = std::strtod(edf_detail::number_field(std::ceil((hi + margin) * 100.0) / 100.0, 8).c_str(), nullptr);
            if (s.physical_min <= lo && s.physical_max >= hi) break;
            margin = margin == 0.0 ? 1e-3 * span : 2.0 * margin;
        }
        s.digital_min = -32768;
        s.digital_max = 32767;
        s.samples_per_record = static_cast<int>(spr);
        std::vector<std::int16_t> q(static_cast<size_t>(n));
        for (long t = 0; t < n; ++t) q[static_cast<size_t>(t)] = static_cast<std::int16_t>(s.to_digital(rec.data(c, t)));
        f.signals.push_back(std::move(s));
        f.samples.push_back(std::move(q));
    }
    return f;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file '" + path + "'");
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace topoeeg
