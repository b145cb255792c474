from unittest import skipUnless

from django.conf import settings

slow = skipUnless(settings.POLARLAB_SLOW_TESTS, 'desk-scale check; set POLARLAB_SLOW_TESTS=1 to run')
