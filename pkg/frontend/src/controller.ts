/** Session flow: create, label-and-advance, conflict re-sync.
 *
 * The controller owns the only mutable view reference. Every transition
 * ends on a server-committed snapshot; at most one label request is in
 * flight at a time, and the instance id submitted is always the id of
 * the pending query the analyst was shown.
 */

import { ApiError, ServiceClient } from "./api.js";
import {
  SessionView,
  canLabel,
  initialView,
  withBanner,
  withInFlight,
  withNotice,
  withSnapshot,
} from "./state.js";
import type { Label, SessionCreateRequest } from "./types.js";

export type ViewListener = (view: SessionView) => void;

export class SessionController {
  private view: SessionView = initialView;

  constructor(
    private readonly client: ServiceClient,
    private readonly onChange: ViewListener = () => {},
  ) {}

  get current(): SessionView {
    return this.view;
  }

  private commit(view: SessionView): SessionView {
    this.view = view;
    this.onChange(view);
    return view;
  }

  /** Create a session and render its first pending query. */
  async start(req: SessionCreateRequest): Promise<SessionView> {
    try {
      const snapshot = await this.client.createSession(req);
      return this.commit(withNotice(withSnapshot(initialView, snapshot), null));
    } catch (e) {
      return this.commit(withBanner(this.view, describe(e)));
    }
  }

  /** Re-read the committed server state (also the conflict recovery). */
  async refresh(): Promise<SessionView> {
    const snapshot = this.view.snapshot;
    if (!snapshot) return this.view;
    try {
      const fresh = await this.client.getState(snapshot.session_id);
      return this.commit(withSnapshot(this.view, fresh));
    } catch (e) {
      return this.commit(withBanner(this.view, describe(e)));
    }
  }

  /** Label exactly the instance being shown, then advance.
   *
   * A second call while a request is in flight is a no-op, so a
   * double-click cannot submit twice. A conflict (stale instance or
   * exhausted session) re-syncs from the server and surfaces a notice.
   */
  async labelAndAdvance(label: Label): Promise<SessionView> {
    if (!canLabel(this.view)) return this.view;
    const snapshot = this.view.snapshot!;
    const shownId = snapshot.pending!.instance_id;
    this.commit(withInFlight(withNotice(this.view, null), true));
    try {
      await this.client.submitLabel(snapshot.session_id, shownId, label);
      const fresh = await this.client.getState(snapshot.session_id);
      return this.commit(withInFlight(withSnapshot(this.view, fresh), false));
    } catch (e) {
      if (e instanceof ApiError && e.isConflict) {
        const resynced = await this.resyncAfterConflict(e);
        return this.commit(withInFlight(resynced, false));
      }
      return this.commit(withInFlight(withBanner(this.view, describe(e)), false));
    }
  }

  private async resyncAfterConflict(e: ApiError): Promise<SessionView> {
    const snapshot = this.view.snapshot;
    if (!snapshot) return withNotice(this.view, e.message);
    try {
      const fresh = await this.client.getState(snapshot.session_id);
      return withNotice(
        withSnapshot(this.view, fresh),
        `submission rejected (${e.code}); view re-synced with the server`,
      );
    } catch (inner) {
      return withBanner(this.view, describe(inner));
    }
  }
}

function describe(e: unknown): string {
  if (e instanceof ApiError) return `${e.code}: ${e.message}`;
  return String(e);
}
