#pragma once

// Click-stream container and its on-disk formats.
//
// Binary layout (all integers little-endian), total 80 + 16*n_records bytes:
//
//   header, 80 bytes
//     0   magic "QTT1" (4 bytes)
//     4   version            u16   (= 1)
//     6   run_kind           u8    (0 input_only, 1 storage, 2 noise_only)
//     7   pad                u8    (zero)
//     8   trial_period_ps    u64
//     16  n_records          u64
//     24  n_trials           u64
//     32  config_hash        32 bytes (digest of the physics config sections)
//     64  reserved           16 zero bytes
//
//   record, 16 bytes each
//     0   timestamp_ps       u64   (absolute, trial k occupies [k*T, (k+1)*T))
//     8   trial_index        u32
//     12  channel            u8    (0 trigger, 1 detector D1, 2 detector D2)
//     13  pad                3 zero bytes
//
// Records are stored in timestamp order; per-channel timestamps are therefore
// non-decreasing. Every trial carries exactly one trigger record on channel 0.
// A lossless CSV mirror (one metadata comment line, then
// trial_index,channel,timestamp_ps) is selected by the ".csv" extension.
//
// Parsing is strict: every defect raises ParseError carrying the byte offset
// of the offending field, and reads are streamed in fixed-size batches so
// memory use does not grow with record count.

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "sha256.hpp"

namespace photonlab {

enum class RunKind : uint8_t { input_only = 0, storage = 1, noise_only = 2 };

inline const char* run_kind_name(RunKind k) {
    switch (k) {
        case RunKind::input_only: return "input_only";
        case RunKind::storage: return "storage";
        case RunKind::noise_only: return "noise_only";
    }
    return "unknown";
}

struct TagRecord {
    uint64_t timestamp_ps = 0;
    uint32_t trial_index = 0;
    uint8_t channel = 0;

    bool operator==(const TagRecord&) const = default;
};

inline constexpr size_t TAG_HEADER_SIZE = 80;
inline constexpr size_t TAG_RECORD_SIZE = 16;
inline constexpr uint16_t TAG_VERSION = 1;
inline constexpr uint8_t CH_TRIGGER = 0;
inline constexpr uint8_t CH_D1 = 1;
inline constexpr uint8_t CH_D2 = 2;

struct TagFileHeader {
    uint16_t version = TAG_VERSION;
    RunKind run_kind = RunKind::input_only;
    uint64_t trial_period_ps = 0;
    uint64_t n_records = 0;
    uint64_t n_trials = 0;
    std::array<uint8_t, 32> config_hash{};
};

struct TimeTagDataset {
    RunKind kind = RunKind::input_only;
    uint64_t trial_period_ps = 0;
    uint64_t n_trials = 0;
    std::array<uint8_t, 32> config_hash{};
    std::vector<TagRecord> records;

    // structural invariants; write_tags refuses datasets that fail these
    void validate() const {
        if (trial_period_ps == 0) throw PreconditionError("dataset: trial_period_ps must be > 0");
        uint64_t triggers = 0;
        uint64_t last_ts[3] = {0, 0, 0};
        bool seen[3] = {false, false, false};
        uint32_t last_trial = 0;
        for (size_t i = 0; i < records.size(); ++i) {
            const TagRecord& r = records[i];
            if (r.channel > CH_D2)
                throw PreconditionError("dataset: record " + std::to_string(i) +
                                        " has channel " + std::to_string(int(r.channel)));
            if (i > 0 && r.trial_index < last_trial)
                throw PreconditionError("dataset: record " + std::to_string(i) +
                                        " decreases trial_index");
            last_trial = r.trial_index;
            if (r.trial_index >= n_trials)
                throw PreconditionError("dataset: record " + std::to_string(i) +
                                        " references trial beyond n_trials");
            const uint64_t lo = r.trial_index * trial_period_ps;
            if (r.timestamp_ps < lo || r.timestamp_ps >= lo + trial_period_ps)
                throw PreconditionError("dataset: record " + std::to_string(i) +
                                        " timestamp outside its trial period");
            if (seen[r.channel] && r.timestamp_ps < last_ts[r.channel])
                throw PreconditionError("dataset: record " + std::to_string(i) +
                                        " breaks per-channel timestamp order");
            seen[r.channel] = true;
            last_ts[r.channel] = r.timestamp_ps;
            if (r.channel == CH_TRIGGER) ++triggers;
        }
        if (triggers != n_trials)
            throw PreconditionError("dataset: " + std::to_string(triggers) + " trigger records for " +
                                    std::to_string(n_trials) + " trials");
    }
};

namespace detail {

inline void put_u16(uint8_t* p, uint16_t v) {
    p[0] = uint8_t(v);
    p[1] = uint8_t(v >> 8);
}
inline void put_u32(uint8_t* p, uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = uint8_t(v >> (8 * i));
}
inline void put_u64(uint8_t* p, uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = uint8_t(v >> (8 * i));
}
inline uint16_t get_u16(const uint8_t* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }
inline uint32_t get_u32(const uint8_t* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(p[i]) << (8 * i);
    return v;
}
inline uint64_t get_u64(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
    return v;
}

inline bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

} // namespace detail

inline void encode_header(const TagFileHeader& h, uint8_t out[TAG_HEADER_SIZE]) {
    std::memset(out, 0, TAG_HEADER_SIZE);
    std::memcpy(out, "QTT1", 4);
    detail::put_u16(out + 4, h.version);
    out[6] = uint8_t(h.run_kind);
    out[7] = 0;
    detail::put_u64(out + 8, h.trial_period_ps);
    detail::put_u64(out + 16, h.n_records);
    detail::put_u64(out + 24, h.n_trials);
    std::memcpy(out + 32, h.config_hash.data(), 32);
    // bytes 64..79 stay zero (reserved)
}

inline TagFileHeader decode_header(const uint8_t in[TAG_HEADER_SIZE]) {
    if (std::memcmp(in, "QTT1", 4) != 0) throw ParseError("bad magic, expected QTT1", 0);
    TagFileHeader h;
    h.version = detail::get_u16(in + 4);
    if (h.version != TAG_VERSION)
        throw ParseError("unsupported version " + std::to_string(h.version), 4);
    if (in[6] > uint8_t(RunKind::noise_only))
        throw ParseError("unknown run kind " + std::to_string(int(in[6])), 6);
    h.run_kind = RunKind(in[6]);
    if (in[7] != 0) throw ParseError("nonzero header pad byte", 7);
    h.trial_period_ps = detail::get_u64(in + 8);
    h.n_records = detail::get_u64(in + 16);
    h.n_trials = detail::get_u64(in + 24);
    std::memcpy(h.config_hash.data(), in + 32, 32);
    for (int i = 64; i < 80; ++i)
        if (in[i] != 0) throw ParseError("nonzero reserved byte", uint64_t(i));
    return h;
}

inline void encode_record(const TagRecord& r, uint8_t out[TAG_RECORD_SIZE]) {
    detail::put_u64(out, r.timestamp_ps);
    detail::put_u32(out + 8, r.trial_index);
    out[12] = r.channel;
    out[13] = out[14] = out[15] = 0;
}

// --- binary write ---------------------------------------------------------

inline void write_tags_binary(const TimeTagDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    TagFileHeader h;
    h.run_kind = ds.kind;
    h.trial_period_ps = ds.trial_period_ps;
    h.n_records = ds.records.size();
    h.n_trials = ds.n_trials;
    h.config_hash = ds.config_hash;
    uint8_t hb[TAG_HEADER_SIZE];
    encode_header(h, hb);
    f.write(reinterpret_cast<const char*>(hb), TAG_HEADER_SIZE);

    constexpr size_t BATCH = 4096;
    std::vector<uint8_t> buf(BATCH * TAG_RECORD_SIZE);
    size_t in_buf = 0;
    for (const TagRecord& r : ds.records) {
        encode_record(r, buf.data() + in_buf * TAG_RECORD_SIZE);
        if (++in_buf == BATCH) {
            f.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(in_buf * TAG_RECORD_SIZE));
            in_buf = 0;
        }
    }
    if (in_buf)
        f.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(in_buf * TAG_RECORD_SIZE));
    if (!f) throw IoError("write failed on " + path);
}

// --- streaming write --------------------------------------------------------

// push-based writer: records stream straight to disk, so datasets never need
// to fit in memory. Enforces the same structural invariants as validate()
// incrementally. Binary files get n_records patched on close(); CSV files
// (.csv path) carry their metadata in the comment line. close() is mandatory.
class TagWriter {
  public:
    TagWriter(const std::string& path, RunKind kind, uint64_t trial_period_ps, uint64_t n_trials,
              const std::array<uint8_t, 32>& config_hash)
        : path_(path),
          csv_(path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0),
          period_(trial_period_ps), n_trials_(n_trials) {
        if (trial_period_ps == 0) throw PreconditionError("tag writer: zero trial period");
        f_.open(path, csv_ ? (std::ios::out | std::ios::trunc)
                           : (std::ios::out | std::ios::binary | std::ios::trunc));
        if (!f_) throw IoError("cannot open " + path + " for writing");
        if (csv_) {
            f_ << "# QTT1 v" << TAG_VERSION << " run_kind=" << int(kind)
               << " trial_period_ps=" << trial_period_ps << " n_trials=" << n_trials
               << " config_hash=" << Sha256::hex(config_hash) << "\n";
            f_ << "trial_index,channel,timestamp_ps\n";
        } else {
            TagFileHeader h;
            h.run_kind = kind;
            h.trial_period_ps = trial_period_ps;
            h.n_records = 0; // patched on close
            h.n_trials = n_trials;
            h.config_hash = config_hash;
            uint8_t hb[TAG_HEADER_SIZE];
            encode_header(h, hb);
            f_.write(reinterpret_cast<const char*>(hb), TAG_HEADER_SIZE);
            buf_.resize(BATCH * TAG_RECORD_SIZE);
        }
    }

    TagWriter(const TagWriter&) = delete;
    TagWriter& operator=(const TagWriter&) = delete;

    // all checks run before any state changes, so a caller may catch the
    // PreconditionError and keep streaming
    void add(const TagRecord& r) {
        if (closed_) throw PreconditionError("tag writer: add after close");
        if (r.channel > CH_D2) throw PreconditionError("tag writer: channel out of range");
        if (r.trial_index >= n_trials_) throw PreconditionError("tag writer: trial_index >= n_trials");
        if (have_last_trial_ && r.trial_index < last_trial_)
            throw PreconditionError("tag writer: trial_index decreases");
        const bool new_trial = !have_last_trial_ || r.trial_index != last_trial_;
        if (new_trial && have_last_trial_ && triggers_in_trial_ != 1)
            throw PreconditionError("tag writer: trial without exactly one trigger");
        if (!new_trial && r.channel == CH_TRIGGER && triggers_in_trial_ != 0)
            throw PreconditionError("tag writer: second trigger in one trial");
        const uint64_t base = uint64_t(r.trial_index) * period_;
        if (r.timestamp_ps < base || r.timestamp_ps >= base + period_)
            throw PreconditionError("tag writer: timestamp outside its trial");
        if (seen_[r.channel] && r.timestamp_ps < last_ts_[r.channel])
            throw PreconditionError("tag writer: non-monotone timestamp");

        if (new_trial) triggers_in_trial_ = 0;
        last_trial_ = r.trial_index;
        have_last_trial_ = true;
        seen_[r.channel] = true;
        last_ts_[r.channel] = r.timestamp_ps;
        ++n_records_;
        if (r.channel == CH_TRIGGER) {
            ++triggers_in_trial_;
            ++triggers_total_;
        }
        if (csv_) {
            f_ << r.trial_index << ',' << int(r.channel) << ',' << r.timestamp_ps << "\n";
        } else {
            encode_record(r, buf_.data() + in_buf_ * TAG_RECORD_SIZE);
            if (++in_buf_ == BATCH) flush_buf();
        }
    }

    uint64_t n_records() const { return n_records_; }

    void close() {
        if (closed_) return;
        if (have_last_trial_ && triggers_in_trial_ != 1)
            throw PreconditionError("tag writer: trial without exactly one trigger");
        if (triggers_total_ != n_trials_)
            throw PreconditionError("tag writer: got " + std::to_string(triggers_total_) +
                                    " triggers for " + std::to_string(n_trials_) + " trials");
        if (!csv_) {
            flush_buf();
            f_.seekp(16); // n_records header field
            uint8_t b[8];
            detail::put_u64(b, n_records_);
            f_.write(reinterpret_cast<const char*>(b), 8);
        }
        f_.flush();
        if (!f_) throw IoError("write failed on " + path_);
        f_.close();
        closed_ = true;
    }

    ~TagWriter() {
        if (!closed_) {
            try {
                close();
            } catch (...) {
                // a half-written file from an unwinding stack stays invalid on
                // purpose; callers that care call close() themselves
            }
        }
    }

  private:
    static constexpr size_t BATCH = 4096;

    void flush_buf() {
        if (in_buf_ == 0) return;
        f_.write(reinterpret_cast<const char*>(buf_.data()),
                 std::streamsize(in_buf_ * TAG_RECORD_SIZE));
        in_buf_ = 0;
    }

    std::ofstream f_;
    std::string path_;
    bool csv_ = false;
    uint64_t period_ = 0;
    uint64_t n_trials_ = 0;
    std::vector<uint8_t> buf_;
    size_t in_buf_ = 0;
    uint64_t n_records_ = 0;
    uint64_t triggers_total_ = 0;
    uint32_t triggers_in_trial_ = 0;
    uint64_t last_ts_[3] = {0, 0, 0};
    bool seen_[3] = {false, false, false};
    uint32_t last_trial_ = 0;
    bool have_last_trial_ = false;
    bool closed_ = false;
};

// --- binary streaming read -------------------------------------------------

// pull-based reader; memory use is one batch regardless of file size
class TagReader {
  public:
    explicit TagReader(const std::string& path, size_t batch = 4096)
        : f_(path, std::ios::binary), path_(path), batch_(batch) {
        if (!f_) throw IoError("cannot open " + path);
        f_.seekg(0, std::ios::end);
        file_size_ = uint64_t(f_.tellg());
        f_.seekg(0);
        if (file_size_ < TAG_HEADER_SIZE)
            throw ParseError("file truncated inside header (size " + std::to_string(file_size_) + ")",
                             file_size_);
        uint8_t hb[TAG_HEADER_SIZE];
        f_.read(reinterpret_cast<char*>(hb), TAG_HEADER_SIZE);
        if (!f_) throw IoError("read failed on " + path);
        header_ = decode_header(hb);
        const uint64_t expect = TAG_HEADER_SIZE + header_.n_records * TAG_RECORD_SIZE;
        if (file_size_ < expect) {
            const uint64_t complete = (file_size_ - TAG_HEADER_SIZE) / TAG_RECORD_SIZE;
            throw ParseError("file truncated mid-record after " + std::to_string(complete) +
                                 " complete records",
                             TAG_HEADER_SIZE + complete * TAG_RECORD_SIZE);
        }
        if (file_size_ > expect)
            throw ParseError("trailing garbage after declared " + std::to_string(header_.n_records) +
                                 " records",
                             expect);
    }

    const TagFileHeader& header() const { return header_; }

    // appends up to one batch; returns false when the stream is exhausted
    bool next_batch(std::vector<TagRecord>& out) {
        if (read_ >= header_.n_records) return false;
        const size_t want = size_t(std::min<uint64_t>(batch_, header_.n_records - read_));
        buf_.resize(want * TAG_RECORD_SIZE);
        f_.read(reinterpret_cast<char*>(buf_.data()), std::streamsize(buf_.size()));
        if (!f_) throw IoError("read failed on " + path_);
        for (size_t i = 0; i < want; ++i) {
            const uint8_t* p = buf_.data() + i * TAG_RECORD_SIZE;
            const uint64_t base = TAG_HEADER_SIZE + (read_ + i) * TAG_RECORD_SIZE;
            TagRecord r;
            r.timestamp_ps = detail::get_u64(p);
            r.trial_index = detail::get_u32(p + 8);
            r.channel = p[12];
            if (r.channel > CH_D2)
                throw ParseError("channel " + std::to_string(int(r.channel)) + " out of range",
                                 base + 12);
            if (p[13] || p[14] || p[15]) throw ParseError("nonzero record pad", base + 13);
            if (seen_[r.channel] && r.timestamp_ps < last_ts_[r.channel])
                throw ParseError("non-monotone timestamp on channel " + std::to_string(int(r.channel)),
                                 base);
            seen_[r.channel] = true;
            last_ts_[r.channel] = r.timestamp_ps;
            if (have_last_trial_ && r.trial_index < last_trial_)
                throw ParseError("trial_index decreases", base + 8);
            last_trial_ = r.trial_index;
            have_last_trial_ = true;
            out.push_back(r);
        }
        read_ += want;
        return true;
    }

  private:
    std::ifstream f_;
    std::string path_;
    size_t batch_;
    uint64_t file_size_ = 0;
    TagFileHeader header_;
    uint64_t read_ = 0;
    std::vector<uint8_t> buf_;
    uint64_t last_ts_[3] = {0, 0, 0};
    bool seen_[3] = {false, false, false};
    uint32_t last_trial_ = 0;
    bool have_last_trial_ = false;
};

// --- CSV mirror ------------------------------------------------------------

inline void write_tags_csv(const TimeTagDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "# QTT1 v" << TAG_VERSION << " run_kind=" << int(ds.kind)
      << " trial_period_ps=" << ds.trial_period_ps << " n_trials=" << ds.n_trials
      << " config_hash=" << Sha256::hex(ds.config_hash) << "\n";
    f << "trial_index,channel,timestamp_ps\n";
    for (const TagRecord& r : ds.records)
        f << r.trial_index << ',' << int(r.channel) << ',' << r.timestamp_ps << "\n";
    if (!f) throw IoError("write failed on " + path);
}

inline TimeTagDataset read_tags_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    TimeTagDataset ds;
    std::string line;
    uint64_t offset = 0;

    auto fail = [&](const std::string& msg) -> ParseError { return ParseError(msg, offset); };

    if (!std::getline(f, line)) throw fail("empty file");
    {
        // "# QTT1 v1 run_kind=K trial_period_ps=T n_trials=N config_hash=HEX"
        unsigned kind = 0, version = 0;
        unsigned long long period = 0, ntrials = 0;
        char hash_hex[65] = {0};
        const int got = std::sscanf(line.c_str(),
                                    "# QTT1 v%u run_kind=%u trial_period_ps=%llu n_trials=%llu "
                                    "config_hash=%64s",
                                    &version, &kind, &period, &ntrials, hash_hex);
        if (got != 5) throw fail("bad metadata line, expected '# QTT1 v1 run_kind=...'");
        if (version != TAG_VERSION) throw ParseError("unsupported version", offset + 7);
        if (kind > unsigned(RunKind::noise_only)) throw fail("unknown run kind");
        ds.kind = RunKind(kind);
        ds.trial_period_ps = period;
        ds.n_trials = ntrials;
        if (std::strlen(hash_hex) != 64) throw fail("config_hash must be 64 hex chars");
        for (int i = 0; i < 32; ++i) {
            auto nib = [&](char c) -> int {
                if (c >= '0' && c <= '9') return c - '0';
                if (c >= 'a' && c <= 'f') return c - 'a' + 10;
                throw fail("config_hash has non-hex characters");
            };
            ds.config_hash[size_t(i)] =
                uint8_t(nib(hash_hex[2 * i]) << 4 | nib(hash_hex[2 * i + 1]));
        }
    }
    offset += line.size() + 1;

    if (!std::getline(f, line)) throw fail("missing column header");
    if (line != "trial_index,channel,timestamp_ps") throw fail("bad column header '" + line + "'");
    offset += line.size() + 1;

    while (std::getline(f, line)) {
        if (line.empty()) {
            offset += 1;
            continue;
        }
        unsigned long long trial = 0, ts = 0;
        unsigned ch = 0;
        if (std::sscanf(line.c_str(), "%llu,%u,%llu", &trial, &ch, &ts) != 3)
            throw fail("bad record line '" + line + "'");
        if (ch > CH_D2) throw fail("channel out of range in '" + line + "'");
        ds.records.push_back(TagRecord{ts, uint32_t(trial), uint8_t(ch)});
        offset += line.size() + 1;
    }
    ds.validate();
    return ds;
}

// --- format-dispatching entry points ---------------------------------------

inline void write_tags(const TimeTagDataset& ds, const std::string& path) {
    if (detail::has_suffix(path, ".csv"))
        write_tags_csv(ds, path);
    else
        write_tags_binary(ds, path);
}

inline TimeTagDataset read_tags(const std::string& path) {
    if (detail::has_suffix(path, ".csv")) return read_tags_csv(path);
    TagReader reader(path);
    TimeTagDataset ds;
    ds.kind = reader.header().run_kind;
    ds.trial_period_ps = reader.header().trial_period_ps;
    ds.n_trials = reader.header().n_trials;
    ds.config_hash = reader.header().config_hash;
    ds.records.reserve(size_t(reader.header().n_records));
    while (reader.next_batch(ds.records)) {
    }
    return ds;
}

} // namespace photonlab
