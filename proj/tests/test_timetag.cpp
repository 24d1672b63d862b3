#include <catch2/catch_amalgamated.hpp>

#include <photonlab/timetag.hpp>

#include <cstdio>
#include <fstream>

using namespace photonlab;

namespace {

TimeTagDataset sample_dataset() {
    TimeTagDataset ds;
    ds.kind = RunKind::storage;
    ds.trial_period_ps = 4000000; // 4 us
    ds.n_trials = 2;
    ds.config_hash = Sha256::of("sample configuration");
    ds.records = {
        {0, 0, CH_TRIGGER},       {400000, 0, CH_D1}, {500000, 0, CH_D2},
        {4000000, 1, CH_TRIGGER}, {4450000, 1, CH_D1},
    };
    return ds;
}

std::vector<uint8_t> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(f), {});
}

void spew(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    REQUIRE(f.good());
}

// returns the ParseError offset, or -1 if no ParseError was thrown
int64_t parse_offset_of(const std::string& path) {
    try {
        (void)read_tags(path);
    } catch (const ParseError& e) {
        return int64_t(e.offset);
    }
    return -1;
}

const std::string kBin = "/tmp/photonlab_tags_test.qtt";
const std::string kCsv = "/tmp/photonlab_tags_test.csv";

} // namespace

TEST_CASE("tag file sizes are exactly header plus records", "[timetag]") {
    TimeTagDataset empty;
    empty.trial_period_ps = 4000000;
    empty.n_trials = 0;
    write_tags(empty, kBin);
    REQUIRE(slurp(kBin).size() == 80);

    TimeTagDataset three;
    three.trial_period_ps = 4000000;
    three.n_trials = 1;
    three.records = {{0, 0, CH_TRIGGER}, {100, 0, CH_D1}, {200, 0, CH_D2}};
    write_tags(three, kBin);
    REQUIRE(slurp(kBin).size() == 128);
}

TEST_CASE("binary round trip preserves every field", "[timetag]") {
    TimeTagDataset ds = sample_dataset();
    write_tags(ds, kBin);
    TimeTagDataset back = read_tags(kBin);
    REQUIRE(back.kind == ds.kind);
    REQUIRE(back.trial_period_ps == ds.trial_period_ps);
    REQUIRE(back.n_trials == ds.n_trials);
    REQUIRE(back.config_hash == ds.config_hash);
    REQUIRE(back.records == ds.records);
}

TEST_CASE("csv round trip preserves every field", "[timetag]") {
    TimeTagDataset ds = sample_dataset();
    write_tags(ds, kCsv);
    TimeTagDataset back = read_tags(kCsv);
    REQUIRE(back.kind == ds.kind);
    REQUIRE(back.trial_period_ps == ds.trial_period_ps);
    REQUIRE(back.n_trials == ds.n_trials);
    REQUIRE(back.config_hash == ds.config_hash);
    REQUIRE(back.records == ds.records);
}

TEST_CASE("header corruption is reported at the exact byte", "[timetag]") {
    write_tags(sample_dataset(), kBin);
    const std::vector<uint8_t> good = slurp(kBin);

    auto mutated = [&](size_t at, uint8_t value) {
        std::vector<uint8_t> b = good;
        b[at] = value;
        spew(kBin, b);
        return parse_offset_of(kBin);
    };

    REQUIRE(mutated(1, 'X') == 0);   // magic
    REQUIRE(mutated(4, 9) == 4);     // version
    REQUIRE(mutated(6, 7) == 6);     // run kind
    REQUIRE(mutated(7, 1) == 7);     // header pad
    REQUIRE(mutated(70, 5) == 70);   // reserved block
}

TEST_CASE("truncation and trailing bytes are caught", "[timetag]") {
    write_tags(sample_dataset(), kBin);
    const std::vector<uint8_t> good = slurp(kBin);
    REQUIRE(good.size() == 160);

    std::vector<uint8_t> cut(good.begin(), good.begin() + 40);
    spew(kBin, cut);
    REQUIRE(parse_offset_of(kBin) == 40); // inside the header

    std::vector<uint8_t> mid(good.begin(), good.begin() + 117);
    spew(kBin, mid);
    REQUIRE(parse_offset_of(kBin) == 112); // after 2 complete records

    std::vector<uint8_t> extra = good;
    extra.insert(extra.end(), {1, 2, 3});
    spew(kBin, extra);
    REQUIRE(parse_offset_of(kBin) == 160); // first trailing byte
}

TEST_CASE("record corruption is reported at the exact byte", "[timetag]") {
    write_tags(sample_dataset(), kBin);
    const std::vector<uint8_t> good = slurp(kBin);

    // record i lives at 80 + 16*i
    std::vector<uint8_t> b = good;
    b[112 + 12] = 9; // record 2 channel
    spew(kBin, b);
    REQUIRE(parse_offset_of(kBin) == 124);

    b = good;
    b[112 + 13] = 1; // record 2 pad
    spew(kBin, b);
    REQUIRE(parse_offset_of(kBin) == 125);

    b = good;
    // record 4 is trial 1 D1 at ts 4450000; push it before trial 0's D1 tag
    for (int i = 0; i < 8; ++i) b[144 + i] = 0;
    b[144] = 10;
    spew(kBin, b);
    REQUIRE(parse_offset_of(kBin) == 144); // channel timestamps no longer monotone

    b = good;
    b[144 + 8] = 0; // record 4 trial_index drops back to 0
    spew(kBin, b);
    REQUIRE(parse_offset_of(kBin) == 152);
}

TEST_CASE("structurally invalid datasets are refused before writing", "[timetag]") {
    TimeTagDataset ds = sample_dataset();
    ds.records[1].channel = 3;
    REQUIRE_THROWS_AS(write_tags(ds, kBin), PreconditionError);

    ds = sample_dataset();
    ds.records[1].timestamp_ps = 9000000; // outside trial 0
    REQUIRE_THROWS_AS(write_tags(ds, kBin), PreconditionError);

    ds = sample_dataset();
    ds.records[3].channel = CH_D1; // trial 1 loses its trigger
    REQUIRE_THROWS_AS(write_tags(ds, kBin), PreconditionError);

    ds = sample_dataset();
    ds.trial_period_ps = 0;
    REQUIRE_THROWS_AS(write_tags(ds, kBin), PreconditionError);
}

TEST_CASE("csv rejects a malformed column header", "[timetag]") {
    write_tags(sample_dataset(), kCsv);
    std::vector<uint8_t> b = slurp(kCsv);
    // flip one character of "trial_index" on the second line
    const std::string text(b.begin(), b.end());
    const size_t pos = text.find("\ntrial_index");
    REQUIRE(pos != std::string::npos);
    b[pos + 1] = 'T';
    spew(kCsv, b);
    REQUIRE_THROWS_AS(read_tags(kCsv), ParseError);
}

TEST_CASE("streaming reader walks large files in bounded batches", "[timetag]") {
    TimeTagDataset ds;
    ds.kind = RunKind::input_only;
    ds.trial_period_ps = 4000000;
    ds.n_trials = 20000;
    for (uint32_t t = 0; t < 20000; ++t) {
        ds.records.push_back({uint64_t(t) * 4000000, t, CH_TRIGGER});
        if (t % 3 == 0) ds.records.push_back({uint64_t(t) * 4000000 + 500000, t, CH_D1});
    }
    write_tags(ds, kBin);

    TagReader reader(kBin, 512);
    REQUIRE(reader.header().n_records == ds.records.size());
    std::vector<TagRecord> batch;
    size_t total = 0;
    while (true) {
        batch.clear();
        if (!reader.next_batch(batch)) break;
        REQUIRE(batch.size() <= 512);
        total += batch.size();
    }
    REQUIRE(total == ds.records.size());
    std::remove(kBin.c_str());
    std::remove(kCsv.c_str());
}

TEST_CASE("streaming writer matches the one-shot writers byte for byte", "[timetag]") {
    TimeTagDataset ds;
    ds.kind = RunKind::storage;
    ds.trial_period_ps = 4000000;
    ds.n_trials = 500;
    ds.config_hash = Sha256::of("writer parity");
    for (uint32_t t = 0; t < 500; ++t) {
        const uint64_t base = uint64_t(t) * 4000000;
        ds.records.push_back({base, t, CH_TRIGGER});
        if (t % 2 == 0) ds.records.push_back({base + 400000, t, CH_D1});
        if (t % 7 == 0) ds.records.push_back({base + 400000, t, CH_D2});
        if (t % 11 == 0) ds.records.push_back({base + 1750000, t, CH_D1});
    }
    write_tags(ds, kBin);
    write_tags(ds, kCsv);

    const std::string sBin = "/tmp/photonlab_tags_stream.qtt";
    const std::string sCsv = "/tmp/photonlab_tags_stream.csv";
    {
        TagWriter wb(sBin, ds.kind, ds.trial_period_ps, ds.n_trials, ds.config_hash);
        TagWriter wc(sCsv, ds.kind, ds.trial_period_ps, ds.n_trials, ds.config_hash);
        for (const TagRecord& r : ds.records) {
            wb.add(r);
            wc.add(r);
        }
        wb.close();
        wc.close();
        REQUIRE(wb.n_records() == ds.records.size());
    }
    REQUIRE(slurp(sBin) == slurp(kBin));
    REQUIRE(slurp(sCsv) == slurp(kCsv));
    std::remove(sBin.c_str());
    std::remove(sCsv.c_str());
    std::remove(kBin.c_str());
    std::remove(kCsv.c_str());
}

TEST_CASE("streaming writer enforces record invariants as they arrive", "[timetag]") {
    const auto hash = Sha256::of("writer invariants");
    const std::string p = "/tmp/photonlab_tags_invariant.qtt";

    {
        TagWriter w(p, RunKind::storage, 4000000, 3, hash);
        CHECK_THROWS_AS(w.add({0, 0, 3}), PreconditionError);            // bad channel
        CHECK_THROWS_AS(w.add({12000000, 3, CH_TRIGGER}), PreconditionError); // beyond n_trials
        w.add({0, 0, CH_TRIGGER});
        CHECK_THROWS_AS(w.add({1000, 0, CH_TRIGGER}), PreconditionError); // second trigger
        w.add({200000, 0, CH_D1});
        CHECK_THROWS_AS(w.add({100000, 0, CH_D1}), PreconditionError);   // non-monotone in channel
        w.add({100000, 0, CH_D2});                                       // other channel is fine
        CHECK_THROWS_AS(w.add({4000001, 0, CH_D1}), PreconditionError);  // outside trial 0
        w.add({4000000, 1, CH_TRIGGER});
        CHECK_THROWS_AS(w.add({8000000, 0, CH_TRIGGER}), PreconditionError); // trial goes backwards
        w.add({8000000, 2, CH_D1}); // trial 2 opens, its trigger never comes...
        CHECK_THROWS_AS(w.close(), PreconditionError); // ...caught at close
    }
    {
        // a trial with no trigger is caught at the next trial boundary
        TagWriter w(p, RunKind::storage, 4000000, 3, hash);
        w.add({0, 0, CH_TRIGGER});
        w.add({4500000, 1, CH_D1});
        CHECK_THROWS_AS(w.add({8000000, 2, CH_TRIGGER}), PreconditionError);
    }
    {
        TagWriter w(p, RunKind::storage, 4000000, 1, hash);
        w.add({0, 0, CH_TRIGGER});
        w.close();
        CHECK_THROWS_AS(w.add({1, 0, CH_D1}), PreconditionError); // closed
    }
    std::remove(p.c_str());
}

TEST_CASE("streaming writer emits a readable header-only file for zero trials", "[timetag]") {
    const auto hash = Sha256::of("empty run");
    const std::string p = "/tmp/photonlab_tags_empty.qtt";
    {
        TagWriter w(p, RunKind::noise_only, 4000000, 0, hash);
        w.close();
    }
    REQUIRE(slurp(p).size() == TAG_HEADER_SIZE);
    TimeTagDataset ds = read_tags(p);
    CHECK(ds.n_trials == 0);
    CHECK(ds.records.empty());
    CHECK(ds.kind == RunKind::noise_only);
    std::remove(p.c_str());
}
