/**
 * Terminal viewer: connects to a running gateway, narrates events and shots,
 * mirrors config changes, and (optionally) dumps map/viewport SVG frames.
 *
 *   node dist/main.js --host 127.0.0.1 --port 7654 [--frames-dir out/]
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import { AnnouncerClient } from './client.js';
import { FeedbackPanel } from './feedback.js';
import { mapView } from './mapview.js';
import { ViewerState } from './state.js';
import { announcerViewport } from './viewport.js';

function parseArgs(argv: string[]): { host: string; port: number; framesDir: string | null } {
  let host = '127.0.0.1';
  let port = 7654;
  let framesDir: string | null = null;
  for (let i = 0; i < argv.length; i += 1) {
    if (argv[i] === '--host') host = argv[++i];
    else if (argv[i] === '--port') port = Number(argv[++i]);
    else if (argv[i] === '--frames-dir') framesDir = argv[++i];
  }
  return { host, port, framesDir };
}

async function main(): Promise<void> {
  const { host, port, framesDir } = parseArgs(process.argv.slice(2));
  const state = new ViewerState();
  let frameIndex = 0;

  const client = new AnnouncerClient(host, port, {
    onMessage: (message) => {
      state.apply(message);
      switch (message.type) {
        case 'hello':
          console.log(`connected as ${message.session}`);
          break;
        case 'event':
          console.log(`[${message.t.toFixed(1)}s] event ${message.id}: ${message.kind} score=${message.score.toFixed(2)}`);
          break;
        case 'shot':
          console.log(`[${message.t.toFixed(1)}s] shot: ${message.spec}`);
          break;
        case 'config':
          console.log(
            `[config] transition=${message.transition_duration.toFixed(2)}s shot=${message.shot_duration.toFixed(2)}s ` +
              `f=${message.f.toFixed(2)} fetch=${message.fetch_period.toFixed(1)}s`,
          );
          break;
        case 'prompt':
          panel.show(message);
          console.log(`[prompt] ${message.kind}${message.context ? `: ${message.context}` : ''}`);
          break;
        case 'snapshot':
          if (framesDir && message.seq % 20 === 0) {
            fs.mkdirSync(framesDir, { recursive: true });
            fs.writeFileSync(path.join(framesDir, `map_${frameIndex}.svg`), mapView(state));
            fs.writeFileSync(
              path.join(framesDir, `view_${frameIndex}.svg`),
              announcerViewport(state),
            );
            frameIndex += 1;
          }
          break;
        default:
          break;
      }
    },
    onClose: () => {
      state.markDisconnected();
      console.log('disconnected');
      process.exit(0);
    },
  });
  const panel = new FeedbackPanel((message) => client.send(message));

  await client.connect();
  console.log(`viewing ${host}:${port}  (ctrl-c to quit)`);
}

main().catch((err) => {
  console.error(err.message ?? err);
  process.exit(1);
});
