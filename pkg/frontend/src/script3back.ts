/** The canonical scripted 3-back session shared by tests and the committed
 * fixture: one epoch unanswered, 19 of the remaining 64 scored epochs wrong,
 * for a mistake rate of 19/64 = 29.6875%. */

import { runScriptedTrial } from './runner.js';
import { SessionExport } from './trial.js';

export const SCRIPT_SEED = 7303;
export const SKIPPED_EPOCH = 10;
export const WRONG_COUNT = 19;

export function scripted3BackSession(): SessionExport {
  const wrong = new Set<number>();
  for (let i = 3; wrong.size < WRONG_COUNT; i++) {
    if (i !== SKIPPED_EPOCH) {
      wrong.add(i);
    }
  }
  return runScriptedTrial(
    { subjectId: 'S01', nbackLevel: 3, seed: SCRIPT_SEED },
    { wrongEpochs: wrong, skippedEpochs: new Set([SKIPPED_EPOCH]) },
  );
}
