#include <gtest/gtest.h>

#include <cmath>

#include "ezgzl/store/binary_io.hpp"
#include "ezgzl/store/class_split.hpp"
#include "ezgzl/store/digest.hpp"
#include "ezgzl/store/embedding_bank.hpp"
#include "ezgzl/store/feature_dataset.hpp"
#include "test_util.hpp"

using namespace ezgzl;
using namespace ezgzl::store;

namespace {

EmbeddingBank small_bank(std::uint64_t seed, bool optimized) {
  Rng rng(seed);
  Tensor2 init = testutil::random_unit_rows(rng, 4, 5);
  std::optional<Tensor2> opt;
  if (optimized) opt = testutil::random_unit_rows(rng, 4, 5);
  return EmbeddingBank({"cat", "dog", "violin", "rain"}, init, opt);
}

FeatureDataset small_dataset(const ClassSplit& split) {
  Rng rng(7);
  return FeatureDataset(testutil::random_tensor(rng, 5, 3), testutil::random_tensor(rng, 5, 2), {0, 1, 2, 3, 0},
                        {Partition::train, Partition::train, Partition::test, Partition::test, Partition::val}, split);
}

}  // namespace

TEST(BinaryIo, LittleEndianLayout) {
  ByteWriter w;
  w.put_u32(0x01020304);
  w.put_u16(0xA0B0);
  w.put_string16("hi");
  const auto bytes = w.take();
  const std::vector<std::uint8_t> expected{0x04, 0x03, 0x02, 0x01, 0xB0, 0xA0, 0x02, 0x00, 'h', 'i'};
  EXPECT_EQ(bytes, expected);
  ByteReader r(bytes);
  EXPECT_EQ(r.get_u32(), 0x01020304u);
  EXPECT_EQ(r.get_u16(), 0xA0B0u);
  EXPECT_EQ(r.get_string16(), "hi");
  EXPECT_TRUE(r.at_end());
  EXPECT_THROW(r.get_u8(), FormatError);
}

TEST(BinaryIo, DoublesRoundTripExactly) {
  ByteWriter w;
  for (double x : {0.1, -0.0, 1e-308, 3.141592653589793}) w.put_f64(x);
  const auto bytes = w.take();
  ByteReader r(bytes);
  EXPECT_EQ(r.get_f64(), 0.1);
  EXPECT_TRUE(std::signbit(r.get_f64()));
  EXPECT_EQ(r.get_f64(), 1e-308);
  EXPECT_EQ(r.get_f64(), 3.141592653589793);
}

TEST(EmbeddingBank, RoundTripIsByteIdentical) {
  for (bool opt : {false, true}) {
    const auto bank = small_bank(1, opt);
    const auto bytes = encode_embedding_bank(bank);
    const auto back = decode_embedding_bank(bytes);
    EXPECT_EQ(back, bank);
    EXPECT_EQ(encode_embedding_bank(back), bytes);
    EXPECT_EQ(back.has_optimized(), opt);
  }
}

TEST(EmbeddingBank, FileRoundTrip) {
  const auto dir = testutil::scratch_dir("bank_file");
  const auto bank = small_bank(2, true);
  save_embedding_bank(bank, dir / "b.ezb");
  EXPECT_EQ(load_embedding_bank(dir / "b.ezb"), bank);
}

TEST(EmbeddingBank, NearUnitRowsRenormalizedOthersRejected) {
  Tensor2 t{{1.0 + 5e-7, 0.0}, {0.0, 1.0}};
  const EmbeddingBank ok({"a", "b"}, t);
  EXPECT_EQ(ok.initial()(0, 0), 1.0);

  Tensor2 bad{{1.0 + 1e-3, 0.0}, {0.0, 1.0}};
  try {
    EmbeddingBank({"a", "b"}, bad);
    FAIL() << "expected rejection";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("non-unit"), std::string::npos);
  }
}

TEST(EmbeddingBank, RejectsInvalidContents) {
  EXPECT_THROW(EmbeddingBank({"a", "a"}, Tensor2{{1, 0}, {0, 1}}), ValidationError);
  EXPECT_THROW(EmbeddingBank({"a"}, Tensor2{{1, 0}, {0, 1}}), DimensionError);
  EXPECT_THROW(EmbeddingBank({"a", "b"}, Tensor2{{1, 0}, {0, 1}}, Tensor2{{1, 0, 0}, {0, 1, 0}}), DimensionError);
  EXPECT_THROW(EmbeddingBank({}, Tensor2()), ValidationError);
}

TEST(EmbeddingBank, CorruptFilesRejected) {
  auto bytes = encode_embedding_bank(small_bank(3, false));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  try {
    decode_embedding_bank(bad_magic);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos);
  }
  auto truncated = bytes;
  truncated.resize(bytes.size() - 8);
  try {
    decode_embedding_bank(truncated);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("mismatch"), std::string::npos);
  }
  auto flag = bytes;
  flag[12] = 7;
  EXPECT_THROW(decode_embedding_bank(flag), FormatError);
}

TEST(EmbeddingBank, LookupByName) {
  const auto bank = small_bank(4, false);
  EXPECT_EQ(bank.index_of("violin"), 2u);
  EXPECT_FALSE(bank.index_of("piano").has_value());
  EXPECT_EQ(bank.dim(), 5u);
}

TEST(ClassSplit, PartitionInvariants) {
  const ClassSplit s({0, 2}, {3, 1}, 4);
  EXPECT_EQ(s.unseen(), (std::vector<std::size_t>{1, 3}));
  EXPECT_TRUE(s.is_seen(2));
  EXPECT_TRUE(s.is_unseen(1));
  EXPECT_FALSE(s.is_seen(9));
  EXPECT_THROW(ClassSplit({0, 1}, {1, 2, 3}, 4), ValidationError);
  EXPECT_THROW(ClassSplit({0}, {1, 2}, 4), ValidationError);
  EXPECT_THROW(ClassSplit({}, {0, 1}, 2), ValidationError);
  EXPECT_THROW(ClassSplit({0, 5}, {1}, 2), ValidationError);
}

TEST(ClassSplit, SidecarRoundTripByName) {
  const auto bank = small_bank(5, false);
  const ClassSplit s({0, 3}, {1, 2}, 4);
  const std::string text = encode_class_split(s, bank);
  EXPECT_NE(text.find("\"violin\""), std::string::npos);
  EXPECT_EQ(decode_class_split(text, bank), s);
  EXPECT_THROW(decode_class_split(R"({"seen": ["cat"], "unseen": ["piano"]})", bank), ValidationError);
  EXPECT_THROW(decode_class_split("{not json", bank), FormatError);
  EXPECT_THROW(decode_class_split(R"({"seen": ["cat"]})", bank), FormatError);
}

TEST(FeatureDataset, RoundTripIsByteIdentical) {
  const auto bank = small_bank(6, false);
  const ClassSplit split({0, 1}, {2, 3}, 4);
  const auto ds = small_dataset(split);
  const auto bytes = encode_feature_dataset(ds, bank);
  const auto back = decode_feature_dataset(bytes, bank, split);
  EXPECT_EQ(back, ds);
  EXPECT_EQ(encode_feature_dataset(back, bank), bytes);
  EXPECT_EQ(back.indices_in(Partition::test), (std::vector<std::size_t>{2, 3}));
}

TEST(FeatureDataset, UnseenClassInTrainRejected) {
  const ClassSplit split({0, 1}, {2, 3}, 4);
  Rng rng(1);
  EXPECT_THROW(FeatureDataset(testutil::random_tensor(rng, 1, 2), testutil::random_tensor(rng, 1, 2), {2},
                              {Partition::train}, split),
               ValidationError);
}

TEST(FeatureDataset, WidthMismatchNamed) {
  const auto bank = small_bank(8, false);
  const ClassSplit split({0, 1}, {2, 3}, 4);
  auto bytes = encode_feature_dataset(small_dataset(split), bank);
  bytes[8] = 4;  // claim d_v = 4 while records hold 3
  try {
    decode_feature_dataset(bytes, bank, split);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("feature dim mismatch"), std::string::npos);
  }
}

TEST(FeatureDataset, UnknownClassNameRejected) {
  const auto bank = small_bank(9, false);
  const ClassSplit split({0, 1}, {2, 3}, 4);
  const auto bytes = encode_feature_dataset(small_dataset(split), bank);
  const EmbeddingBank other({"w", "x", "y", "z"}, bank.initial());
  EXPECT_THROW(decode_feature_dataset(bytes, other, split), ValidationError);
}

TEST(Digest, KnownFnvValues) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_NE(fnv1a_hex("alpha=0.5"), fnv1a_hex("alpha=0.3"));
}
