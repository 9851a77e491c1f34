#include <gtest/gtest.h>

#include <set>

#include "harness.hpp"
#include "privbcast/dcnet.hpp"

using namespace privbcast;
using namespace privbcast::dcnet;
using privbcast::testing::run_dc_round;

namespace {

Bytes hex(const std::string& text) {
  Bytes out;
  for (std::size_t i = 0; i < text.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoul(text.substr(i, 2), nullptr, 16)));
  }
  return out;
}

Bytes random_bytes(Rng& rng, std::size_t n) {
  Bytes b(n);
  rng.fill(b);
  return b;
}

}  // namespace

TEST(Crc, StandardCheckValue) {
  const std::string check = "123456789";
  EXPECT_EQ(crc32(std::span(reinterpret_cast<const std::uint8_t*>(check.data()), check.size())),
            0xCBF43926u);
}

TEST(Frame, EmptyMessageRoundTrips) {
  Payload p = frame({}, 8);
  EXPECT_EQ(p.bytes.size(), 8u);
  EXPECT_TRUE(p.valid);
  auto back = unframe(p.bytes);
  ASSERT_TRUE(back.has_value());
  EXPECT_TRUE(back->empty());
}

TEST(Frame, KnownLayout) {
  // Values computed with Python's zlib.crc32.
  Payload p = frame(hex("deadbeef"), 16);
  EXPECT_EQ(p.bytes, hex("00000004deadbeefcd7a05ef00000000"));
  EXPECT_EQ(p.crc, 0xcd7a05efu);
  EXPECT_EQ(*unframe(p.bytes), hex("deadbeef"));
}

TEST(Frame, EveryBitFlipIsRejected) {
  Rng rng(7);
  Bytes msg = random_bytes(rng, 20);
  Payload p = frame(msg, 40);
  for (std::size_t bit = 0; bit < 8 * 40; ++bit) {
    Bytes mutated = p.bytes;
    mutated[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    Payload q = Payload::parse(mutated);
    EXPECT_FALSE(q.valid) << "bit " << bit;
    EXPECT_FALSE(unframe(mutated).has_value());
  }
}

TEST(Frame, Oversize) {
  Bytes msg(9);
  EXPECT_THROW(frame(msg, 16), OversizeMessage);
  EXPECT_NO_THROW(frame(msg, 17));
}

TEST(Frame, ParseNeverThrowsOnGarbage) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    Bytes raw = random_bytes(rng, rng.below(24));
    EXPECT_NO_THROW((void)Payload::parse(raw));
  }
}

TEST(Announcement, KnownEncoding) {
  EXPECT_EQ(encode_announcement(300), hex("0000012c0a8782be"));
  EXPECT_EQ(decode_announcement(hex("0000012c0a8782be")), 300u);
  // The zero announcement is not the all-zero string.
  EXPECT_EQ(encode_announcement(0), hex("000000002144df1c"));
  EXPECT_FALSE(decode_announcement(hex("0000012c0a8782bf")).has_value());
}

TEST(Shares, SingleShareIsThePayload) {
  Rng rng(1);
  Bytes payload = hex("0102030405");
  auto shares = split_shares(payload, 1, rng);
  ASSERT_EQ(shares.size(), 1u);
  EXPECT_EQ(shares[0], payload);
}

TEST(Shares, ZeroPayloadPairIsEqual) {
  Rng rng(2);
  auto shares = split_shares(Bytes(16, 0), 2, rng);
  EXPECT_EQ(shares[0], shares[1]);
  EXPECT_FALSE(all_zero(shares[0]));
}

TEST(Shares, XorOfSharesIsPayloadProperty) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 1 + rng.below(32);
    Bytes payload = random_bytes(rng, 1 + rng.below(64));
    auto shares = split_shares(payload, k, rng);
    ASSERT_EQ(shares.size(), k);
    for (const auto& s : shares) ASSERT_EQ(s.size(), payload.size());
    EXPECT_EQ(xor_all(shares, payload.size()), payload);
  }
}

TEST(Shares, RejectsZeroShares) {
  Rng rng(1);
  EXPECT_THROW(split_shares(Bytes(4), 0, rng), Error);
}

TEST(Accumulate, TwoMemberExample) {
  auto acc = accumulate({{0, Bytes{0x0F}}, {1, Bytes{0xF0}}});
  EXPECT_EQ(acc.total, Bytes{0xFF});
  EXPECT_EQ(acc.replies.at(0), Bytes{0xF0});
  EXPECT_EQ(acc.replies.at(1), Bytes{0x0F});
}

TEST(Accumulate, ZeroInputs) {
  auto acc = accumulate({{0, Bytes(4)}, {1, Bytes(4)}, {2, Bytes(4)}});
  EXPECT_TRUE(all_zero(acc.total));
  for (const auto& [m, r] : acc.replies) EXPECT_TRUE(all_zero(r));
}

TEST(Accumulate, ReplyPlusOwnIsTotal) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<NodeId, Bytes> received;
    const auto members = 1 + rng.below(10);
    for (NodeId m = 0; m < members; ++m) received[m] = random_bytes(rng, 12);
    auto acc = accumulate(received);
    for (const auto& [m, reply] : acc.replies) {
      Bytes x = reply;
      xor_into(x, received.at(m));
      EXPECT_EQ(x, acc.total);
    }
  }
}

TEST(Accumulate, LengthMismatchThrows) {
  Bytes a(4);
  EXPECT_THROW(xor_into(a, Bytes(5)), Error);
}

TEST(Recovery, IdentityExhaustiveTwoBitMessages) {
  // T ^ S at member c equals M ^ m_c for every input combination.
  for (std::size_t g : {3u, 4u}) {
    std::size_t combos = 1;
    for (std::size_t i = 0; i < g; ++i) combos *= 4;
    Rng rng(g);
    for (std::size_t code = 0; code < combos; ++code) {
      std::vector<Bytes> inputs(g);
      std::uint8_t total = 0;
      std::size_t c = code;
      for (auto& in : inputs) {
        in = Bytes{static_cast<std::uint8_t>(c % 4)};
        total ^= in[0];
        c /= 4;
      }
      auto r = run_dc_round(inputs, RoundKind::kMessage, rng);
      for (auto& [m, st] : r.states) {
        ASSERT_EQ(st.step(), RoundStep::kDone);
        const std::uint8_t ts = st.t_total()[0] ^ st.s_total()[0];
        ASSERT_EQ(ts, total ^ inputs[m][0]) << "g=" << g << " code=" << code << " member=" << m;
      }
    }
  }
}

TEST(Recovery, IdentityRandomizedLargerGroups) {
  Rng rng(99);
  for (std::size_t g = 3; g <= 8; ++g) {
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<Bytes> inputs(g);
      std::uint8_t total = 0;
      for (auto& in : inputs) {
        in = Bytes{static_cast<std::uint8_t>(rng.below(256))};
        total ^= in[0];
      }
      auto r = run_dc_round(inputs, RoundKind::kMessage, rng);
      for (auto& [m, st] : r.states) {
        ASSERT_EQ(st.t_total()[0] ^ st.s_total()[0], total ^ inputs[m][0]);
      }
    }
  }
}

TEST(Recovery, SilenceWhenNobodySends) {
  Rng rng(4);
  auto r = run_dc_round(std::vector<Bytes>(4, Bytes(16)), RoundKind::kMessage, rng);
  for (auto& [m, st] : r.states) EXPECT_EQ(st.outcome()->outcome, Outcome::kSilence);
}

TEST(Recovery, SingleSenderDeliveredEverywhere) {
  Rng rng(8);
  Bytes msg = hex("68656c6c6f");
  for (std::size_t g = 2; g <= 8; ++g) {
    for (NodeId sender = 0; sender < g; ++sender) {
      std::vector<Bytes> inputs(g, Bytes(24));
      inputs[sender] = frame(msg, 24).bytes;
      auto r = run_dc_round(inputs, RoundKind::kMessage, rng);
      for (auto& [m, st] : r.states) {
        const auto& out = *st.outcome();
        ASSERT_EQ(out.outcome, Outcome::kMessage);
        EXPECT_EQ(*unframe(out.bytes), msg);
        EXPECT_EQ(out.own_delivered, m == sender);
        if (m == sender) {
          // The sender's own T ^ S is zero.
          Bytes ts = st.t_total();
          xor_into(ts, st.s_total());
          EXPECT_TRUE(all_zero(ts));
        }
      }
    }
  }
}

TEST(Recovery, TwoSendersCollide) {
  Rng rng(12);
  int detected = 0;
  const int trials = 2000;
  for (int i = 0; i < trials; ++i) {
    std::vector<Bytes> inputs(5, Bytes(40));
    inputs[1] = frame(random_bytes(rng, 16), 40).bytes;
    inputs[3] = frame(random_bytes(rng, 16), 40).bytes;
    auto r = run_dc_round(inputs, RoundKind::kMessage, rng);
    bool all = true;
    for (auto& [m, st] : r.states) all &= st.outcome()->outcome == Outcome::kCollision;
    detected += all;
  }
  // Equal-length frames: the XOR fails the affine CRC check every time.
  EXPECT_EQ(detected, trials);
}

TEST(RoundState, MessageCountIsThreeKTimesKPlusOne) {
  Rng rng(1);
  for (std::size_t g = 1; g <= 12; ++g) {
    auto r = run_dc_round(std::vector<Bytes>(g, Bytes(8)), RoundKind::kAnnouncement, rng);
    const std::uint64_t k = g - 1;
    EXPECT_EQ(r.messages, 3 * k * (k + 1)) << "g=" << g;
  }
}

TEST(RoundState, GroupOfFourCostsThirtySix) {
  Rng rng(1);
  auto r = run_dc_round(std::vector<Bytes>(4, Bytes(8)), RoundKind::kAnnouncement, rng);
  EXPECT_EQ(r.messages, 36u);
}

TEST(RoundState, RejectsOutOfOrderAndStrangers) {
  Rng rng(1);
  RoundState st(0, {1, 2}, 0, Bytes(4), RoundKind::kMessage);
  EXPECT_THROW(st.on_accum_s(1, Bytes(4)), ProtocolViolation);
  (void)st.start(rng);
  EXPECT_THROW(st.on_share(7, Bytes(4)), ProtocolViolation);
  (void)st.on_share(1, Bytes(4));
  EXPECT_THROW(st.on_share(1, Bytes(4)), ProtocolViolation);
  EXPECT_THROW(st.check_deadline(), MissingShare);
}

TEST(RoundState, DeadlineNamesTheMissingMember) {
  Rng rng(1);
  RoundState st(0, {1, 2}, 0, Bytes(4), RoundKind::kMessage);
  (void)st.start(rng);
  (void)st.on_share(1, Bytes(4));
  try {
    st.check_deadline();
    FAIL();
  } catch (const MissingShare& e) {
    EXPECT_NE(std::string(e.what()).find('2'), std::string::npos);
  }
}

TEST(RoundState, ObserverViewIndependentOfSender) {
  // Group of 4, member 0 observes the shares it receives while one of the
  // others sends a one-bit message. The received bytes must be uniform and
  // carry no information about which member sent.
  Rng rng(2024);
  const int rounds = 50'000;
  std::vector<std::vector<double>> by_sender(3, std::vector<double>(256, 0.0));
  std::vector<double> pooled(256, 0.0);
  for (int i = 0; i < rounds; ++i) {
    const NodeId sender = 1 + static_cast<NodeId>(i % 3);
    std::vector<Bytes> inputs(4, Bytes{0});
    inputs[sender] = Bytes{0x01};
    auto r = run_dc_round(inputs, RoundKind::kMessage, rng, true);
    for (const auto& d : r.log) {
      if (d.stage == 0 && d.to == 0 && d.from == 1) {
        by_sender[sender - 1][d.value[0]] += 1;
        pooled[d.value[0]] += 1;
      }
    }
  }
  std::vector<double> expected(256, rounds / 256.0);
  const double p_uniform = privbcast::testing::chi_square_p(privbcast::testing::chi_square_stat(pooled, expected), 255);
  EXPECT_GT(p_uniform, 0.01);

  // Contingency test sender x byte.
  double stat = 0.0;
  for (int s = 0; s < 3; ++s) {
    double row = 0.0;
    for (double v : by_sender[s]) row += v;
    for (int b = 0; b < 256; ++b) {
      const double e = row * pooled[b] / rounds;
      stat += (by_sender[s][b] - e) * (by_sender[s][b] - e) / e;
    }
  }
  EXPECT_GT(privbcast::testing::chi_square_p(stat, 2 * 255), 0.01);
}

TEST(Backoff, FirstAttemptIsOneOrTwo) {
  Rng rng(1);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(backoff_delay(1, rng));
  EXPECT_EQ(seen, (std::set<std::uint64_t>{1, 2}));
}

TEST(Backoff, CappedAtSixtyFour) {
  Rng rng(1);
  for (unsigned attempt : {6u, 7u, 20u}) {
    std::uint64_t lo = 1000, hi = 0;
    for (int i = 0; i < 20'000; ++i) {
      auto d = backoff_delay(attempt, rng);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    EXPECT_EQ(lo, 2u);
    EXPECT_EQ(hi, 64u);
  }
}

TEST(Backoff, RetriesNeverTakeTheNextRound) {
  Rng rng(1);
  for (unsigned attempt = 2; attempt <= 10; ++attempt) {
    for (int i = 0; i < 2000; ++i) {
      const auto d = backoff_delay(attempt, rng);
      ASSERT_GE(d, 2u);
      ASSERT_LE(d, 1ull << std::min(attempt, 6u));
    }
  }
  const auto next = schedule_backoff(10, 1, rng);
  EXPECT_TRUE(next == 11 || next == 12);
}

TEST(Backoff, ReCollisionProbability) {
  // Two colliding senders with independent streams. At attempt 2 the delays
  // are uniform on {2,3,4}, so they meet again with probability 1/3. At the
  // first attempt the window {1,2} gives exactly 1/2.
  Rng a(1001);
  Rng b(2002);
  const int trials = 10'000;
  int again2 = 0, again1 = 0;
  for (int i = 0; i < trials; ++i) {
    again2 += backoff_delay(2, a) == backoff_delay(2, b);
    again1 += backoff_delay(1, a) == backoff_delay(1, b);
  }
  const double p2 = again2 / double(trials);
  const double p1 = again1 / double(trials);
  EXPECT_LT(p2, 0.5);
  EXPECT_NEAR(p2, 1.0 / 3.0, 4 * std::sqrt((1.0 / 3) * (2.0 / 3) / trials));
  EXPECT_NEAR(p1, 0.5, 4 * std::sqrt(0.25 / trials));
}

TEST(Announce, ZeroLengthMeansNoFollowUp) {
  Rng rng(1);
  std::vector<Bytes> inputs(3, Bytes(kAnnouncementSize));
  inputs[0] = encode_announcement(0);
  auto r = run_dc_round(inputs, RoundKind::kAnnouncement, rng);
  auto d = announce_length(*r.states.at(1).outcome());
  EXPECT_EQ(d.next, AnnouncementDecision::Next::kBaseRound);

  auto silent = run_dc_round(std::vector<Bytes>(3, Bytes(kAnnouncementSize)),
                             RoundKind::kAnnouncement, rng);
  EXPECT_EQ(announce_length(*silent.states.at(0).outcome()).next,
            AnnouncementDecision::Next::kBaseRound);
}

TEST(Announce, LengthOpensOneFollowUp) {
  Rng rng(1);
  std::vector<Bytes> inputs(4, Bytes(kAnnouncementSize));
  inputs[2] = encode_announcement(300);
  auto r = run_dc_round(inputs, RoundKind::kAnnouncement, rng);
  for (auto& [m, st] : r.states) {
    auto d = announce_length(*st.outcome());
    EXPECT_EQ(d.next, AnnouncementDecision::Next::kFollowUp);
    EXPECT_EQ(d.follow_up_size, 300u);
  }
}

TEST(Announce, SimultaneousAnnouncementsBackOff) {
  Rng rng(1);
  int backoffs = 0;
  for (std::uint32_t a = 9; a < 200; ++a) {
    std::vector<Bytes> inputs(4, Bytes(kAnnouncementSize));
    inputs[0] = encode_announcement(a);
    inputs[3] = encode_announcement(a + 7);
    auto r = run_dc_round(inputs, RoundKind::kAnnouncement, rng);
    backoffs += announce_length(*r.states.at(1).outcome()).next ==
                AnnouncementDecision::Next::kBackoff;
  }
  EXPECT_EQ(backoffs, 191);
}
