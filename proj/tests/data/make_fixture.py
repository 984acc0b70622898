#!/usr/bin/env python3
"""Regenerates fixture.jsonl, the synthetic three-level training used by the tests."""
import datetime as dt
import json
import random

rng = random.Random(7)
BASH = ["nmap -sV 10.1.26.9", "nmap 10.1.26.0/24", "ls -la", "cat flag.txt", "ssh root@10.1.26.9",
        "hydra -l root -P rockyou.txt ssh://10.1.26.9", "cd /tmp", "john hashes.txt", "ls", "whoami"]
MSF = ["use exploit/unix/ftp/vsftpd_234_backdoor", "set RHOSTS 10.1.26.9", "run", "search vsftpd",
       "show options"]
START = dt.datetime(2021, 3, 24, 9, 0, 0, tzinfo=dt.timezone.utc)


def ts(t):
    return (START + dt.timedelta(milliseconds=t)).strftime("%Y-%m-%dT%H:%M:%S.") + f"{t % 1000:03d}Z"


def main():
    events = []
    for n in range(1, 11):
        trainee = f"t{n:02d}"
        t = rng.randint(0, 60_000)
        engaged = n not in (3, 8)
        events.append((t, trainee, 1, "game", "TrainingStarted", ""))
        for level in (1, 2, 3):
            t += rng.randint(1000, 5000)
            events.append((t, trainee, level, "game", "LevelStarted", ""))
            commands = rng.randint(4, 9) if engaged else rng.randint(0, 2)
            for _ in range(commands):
                t += rng.randint(5000, 90_000)
                if level == 2 and rng.random() < 0.6:
                    events.append((t, trainee, level, "msf", None, rng.choice(MSF)))
                else:
                    events.append((t, trainee, level, "bash", None, rng.choice(BASH)))
            hints = rng.randint(0, 1) if engaged else rng.randint(1, 3)
            for _ in range(hints):
                t += rng.randint(10_000, 60_000)
                events.append((t, trainee, level, "game", "HintTaken", "hint"))
            if not engaged and level == 3:
                t += rng.randint(10_000, 60_000)
                events.append((t, trainee, level, "game", "SolutionDisplayed", ""))
            for _ in range(rng.randint(0, 2)):
                t += rng.randint(5000, 30_000)
                events.append((t, trainee, level, "game", "WrongAnswerSubmitted", "flag{nope}"))
            if n == 10 and level == 3:
                break  # t10 never finishes level 3
            t += rng.randint(5000, 30_000)
            events.append((t, trainee, level, "game", "CorrectAnswerSubmitted", "flag{ok}"))
        if n != 10:
            t += rng.randint(1000, 3000)
            events.append((t, trainee, 3, "game", "TrainingFinished", ""))
    events.sort(key=lambda e: (e[0], e[1]))
    with open("fixture.jsonl", "w") as f:
        for t, trainee, level, cls, game_type, content in events:
            rec = {"timestamp": ts(t), "trainee_id": trainee, "level": level, "event_class": cls,
                   "content": content}
            if game_type:
                rec["game_type"] = game_type
            f.write(json.dumps(rec, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
