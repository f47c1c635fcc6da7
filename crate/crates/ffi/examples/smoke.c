#include <stdio.h>
#include <string.h>

#include "metateach.h"

#define CHECK(call)                                                            \
  do {                                                                         \
    MtStatus st_ = (call);                                                     \
    if (st_ != MT_STATUS_OK) {                                                 \
      fprintf(stderr, "%s -> %d: %s\n", #call, (int)st_,                       \
              mt_last_error_message());                                        \
      return 1;                                                                \
    }                                                                          \
  } while (0)

int main(void) {
  MtSession *s = NULL;
  CHECK(mt_session_new(MT_MODE_FULL_MODALITY, 7, NULL, &s));
  int hits = 0;
  while (mt_session_phase(s) != MT_PHASE_FINISHED) {
    MtOutcome a, b;
    CHECK(mt_session_present_pair(s));
    CHECK(mt_session_outcome(s, 0, &a));
    CHECK(mt_session_outcome(s, 1, &b));
    hits += a.hit || b.hit;
    MtFeedback fb = {
        .preference = a.distance_to_hole <= b.distance_to_hole
                          ? MT_PREFERENCE_FIRST
                          : MT_PREFERENCE_SECOND,
        .guidance_target = MT_TARGET_NONE,
        .correction_target = MT_TARGET_NONE,
        .fallback_save_target = MT_TARGET_NONE,
        .exploration_level = 3,
        .speed_level = 3,
        .fallback_load = false,
    };
    CHECK(mt_session_submit_feedback(s, &fb));
  }
  size_t trials = mt_session_trial_index(s);
  mt_session_free(s);

  double a[] = {1, 2, 3}, b[] = {4, 5, 6};
  MtMannWhitney mw;
  CHECK(mt_mann_whitney(a, 3, b, 3, &mw));

  if (mt_mann_whitney(a, 0, b, 3, &mw) != MT_STATUS_EMPTY_GROUP) return 2;
  if (strlen(mt_last_error_message()) == 0) return 3;

  printf("version=%s protocol=%s trials=%zu hits=%d u=%g p_less=%g\n",
         mt_version(), mt_protocol_version(), trials, hits, mw.u, mw.p_less);
  return 0;
}
