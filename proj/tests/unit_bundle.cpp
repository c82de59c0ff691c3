#include <doctest.h>

#include "sleepstack/bundle.hpp"
#include "sleepstack/errors.hpp"
#include "sleepstack/rng.hpp"
#include "sleepstack/util.hpp"

#include "test_util.hpp"

#include <string>
#include <vector>

using namespace sleepstack;

namespace {

Scaler demo_scaler(ScalingMode mode) {
    Rng rng(71);
    Matrix X(40, kFeatureDim);
    for (auto& v : X.data) v = rng.uniform(-2.0, 2.0);
    std::vector<std::string> subjects;
    for (std::size_t r = 0; r < X.rows; ++r) subjects.push_back(r < 20 ? "s1" : "s2");
    return fit_scaler(X, subjects, mode);
}

StackModel demo_stack() {
    Rng rng(72);
    StackModel stack = make_stack(ClassMode::Phase3);
    for (auto& b : stack.bases) init_weights(b, rng);
    init_weights(stack.meta, rng);
    return stack;
}

// resign the container after an intentional header edit so the crc check
// passes and the parser reaches the field under test
void resign(std::string& bytes) {
    const std::uint32_t crc = crc32(bytes.data(), bytes.size() - 4);
    for (int i = 0; i < 4; ++i)
        bytes[bytes.size() - 4 + static_cast<std::size_t>(i)] =
            static_cast<char>((crc >> (8 * i)) & 0xff);
}

ErrorCode thrown_code(const std::string& bytes) {
    try {
        bundle_from_bytes(bytes);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::UsageError; // not reached in these tests
}

} // namespace

TEST_CASE("stack bundle round trip") {
    StackModel stack = demo_stack();
    Scaler scaler = demo_scaler(ScalingMode::GlobalZscore);
    Bundle bundle = make_stack_bundle(stack, scaler);
    CHECK(bundle.kind == "stacking");
    REQUIRE(bundle.blobs.size() == 5);

    std::string bytes = bundle_to_bytes(bundle);
    Bundle back = bundle_from_bytes(bytes);
    CHECK(back.kind == "stacking");
    CHECK(back.mode == ClassMode::Phase3);
    CHECK(back.feature_map_version == kFeatureMapVersion);
    CHECK(back.scaler.checksum() == scaler.checksum());
    CHECK(back.scaler.mode == ScalingMode::GlobalZscore);
    for (const char* name : Bundle::kStackNames) CHECK(back.blobs.at(name) == bundle.blobs.at(name));

    StackModel loaded = stack_from_bundle(back);
    CHECK(loaded.class_mode == ClassMode::Phase3);
    for (int i = 0; i < kStackBases; ++i)
        CHECK(net_to_bytes(loaded.bases[static_cast<std::size_t>(i)]) ==
              net_to_bytes(stack.bases[static_cast<std::size_t>(i)]));
    CHECK(net_to_bytes(loaded.meta) == net_to_bytes(stack.meta));

    SUBCASE("file round trip") {
        testutil::TempDir tmp("bundle");
        write_bundle(tmp.file("m.ssbn"), bundle);
        Bundle fromfile = read_bundle(tmp.file("m.ssbn"));
        CHECK(bundle_to_bytes(fromfile) == bytes);
    }
    SUBCASE("serialization is deterministic") {
        CHECK(bundle_to_bytes(make_stack_bundle(stack, scaler)) == bytes);
    }
}

TEST_CASE("dense and lstm bundles") {
    Rng rng(73);
    Scaler scaler = demo_scaler(ScalingMode::PerSubjectZscore);

    DenseNet big = build_ann_big();
    init_weights(big, rng);
    Bundle db = make_dense_bundle("ann-big", big, scaler, ClassMode::Wrn3);
    Bundle dback = bundle_from_bytes(bundle_to_bytes(db));
    CHECK(dback.kind == "ann-big");
    CHECK(dback.mode == ClassMode::Wrn3);
    CHECK(dback.scaler.mode == ScalingMode::PerSubjectZscore);
    CHECK(dback.scaler.checksum() == scaler.checksum());
    CHECK(net_to_bytes(dense_from_bundle(dback)) == net_to_bytes(big));

    LstmNet lstm = make_lstm(22, {5}, 3);
    init_lstm_weights(lstm, rng);
    Bundle lb = make_lstm_bundle(lstm, scaler, ClassMode::Phase3);
    Bundle lback = bundle_from_bytes(bundle_to_bytes(lb));
    CHECK(lback.kind == "lstm");
    CHECK(lstm_to_bytes(lstm_from_bundle(lback)) == lstm_to_bytes(lstm));

    SUBCASE("loaders reject the wrong kind") {
        try {
            stack_from_bundle(lback);
            FAIL("expected a throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::BadModel);
        }
        try {
            lstm_from_bundle(dback);
            FAIL("expected a throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::BadModel);
        }
    }
}

TEST_CASE("bundle corruption handling") {
    Bundle bundle = make_stack_bundle(demo_stack(), demo_scaler(ScalingMode::GlobalZscore));
    const std::string good = bundle_to_bytes(bundle);

    SUBCASE("flipped payload byte") {
        std::string bad = good;
        bad[good.size() / 2] = static_cast<char>(bad[good.size() / 2] ^ 0x10);
        CHECK(thrown_code(bad) == ErrorCode::ChecksumMismatch);
    }
    SUBCASE("truncation") {
        CHECK(thrown_code(good.substr(0, good.size() - 9)) == ErrorCode::ChecksumMismatch);
        CHECK(thrown_code(good.substr(0, 8)) == ErrorCode::ChecksumMismatch);
    }
    SUBCASE("trailing garbage") {
        CHECK(thrown_code(good + "XXXX") == ErrorCode::ChecksumMismatch);
    }
    SUBCASE("wrong magic, valid checksum") {
        std::string bad = good;
        bad[0] = 'Z';
        resign(bad);
        CHECK(thrown_code(bad) == ErrorCode::BadMagic);
    }
    SUBCASE("unknown container version") {
        std::string bad = good;
        bad[4] = 9; // version u16 follows the magic
        resign(bad);
        CHECK(thrown_code(bad) == ErrorCode::BadMagic);
    }
    SUBCASE("future feature map") {
        Bundle future = bundle;
        future.feature_map_version = 99;
        CHECK(thrown_code(bundle_to_bytes(future)) == ErrorCode::MalformedFile);
    }
}

TEST_CASE("incomplete stack bundle") {
    Bundle bundle = make_stack_bundle(demo_stack(), demo_scaler(ScalingMode::GlobalZscore));
    bundle.blobs.erase("base3");
    try {
        stack_from_bundle(bundle);
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MalformedFile);
    }
}
